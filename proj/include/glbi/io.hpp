#pragma once

#include "glbi/evaluate.hpp"
#include "glbi/solver.hpp"
#include "glbi/types.hpp"

#include "json.hpp"

#include <string>

namespace glbi::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string read_text(const std::string& path);
/// Creates missing parent directories. Throws IoError on failure.
void write_text(const std::string& path, const std::string& content);

// Dataset CSV: one header row, then one sample per row. A first column
// named "y" holds the response; the remaining columns are x1..xp.
std::string dataset_csv(const Dataset& data);
Dataset parse_dataset_csv(const std::string& text, const std::string& source);
Dataset read_dataset(const std::string& path);
void write_dataset(const std::string& path, const Dataset& data);

// Parameters as {"alpha": [...], "beta": [...]} plus descriptive fields.
Json theta_json(const Theta& theta);
Theta theta_from_json(const Json& j);

// Path storage: a long-format CSV with columns
//   k,t,block,index,node_a,node_b,state_a,state_b,value
// (indices 1-based, beta rows only for nonzero entries, node/state columns
// empty where they do not apply) and a JSON header describing the run.
std::string path_csv(const Path& path);
Json path_header(const Path& path, const std::string& csv_name, const Json& config_echo);
Path path_from(const Json& header, const std::string& csv_text);
/// Writes `<stem>.csv` and `<stem>.json`.
void write_path(const std::string& stem, const Path& path, const Json& config_echo);
/// Reads a path from its JSON header; the CSV is located next to it.
Path read_path(const std::string& json_path);

Json cv_report_json(const CVReport& report);
/// Columns: position,t,k,score,fold_1..fold_K (empty cells for skipped folds).
std::string cv_curve_csv(const CVReport& report);

}  // namespace glbi::io
