#include "fqr/io.hpp"

#include "fqr/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace fqr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan"; }

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    return in;
}

// Reads non-blank lines; returns false at end of input.
bool next_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!trim(line).empty()) return true;
    }
    return false;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                cur += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_number(const std::string& text, const std::string& what) {
    const std::string s = trim(text);
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc() || ptr != last) {
        throw ValidationError(what + ": '" + text + "' is not a number");
    }
    return v;
}

CurveTable read_curves(std::istream& in) {
    std::string line;
    if (!next_line(in, line)) throw ValidationError("curves file is empty");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "obs_id") {
        throw ValidationError("curves header must be obs_id followed by at least 2 grid values");
    }
    CurveTable table;
    const auto h = static_cast<Eigen::Index>(header.size() - 1);
    table.grid.resize(h);
    for (Eigen::Index k = 0; k < h; ++k) {
        table.grid[k] = parse_number(header[static_cast<std::size_t>(k + 1)], "curves header grid value");
        if (!std::isfinite(table.grid[k])) throw ValidationError("curves header grid values must be finite");
        if (k > 0 && !(table.grid[k] > table.grid[k - 1])) {
            throw ValidationError("curves header grid must be strictly increasing");
        }
    }

    std::vector<std::vector<double>> rows;
    std::unordered_set<std::string> seen;
    int line_no = 1;
    while (next_line(in, line)) {
        ++line_no;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ValidationError("curves line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(header.size()));
        }
        const std::string& id = cells[0];
        if (id.empty()) throw ValidationError("curves line " + std::to_string(line_no) + " has an empty obs_id");
        if (!seen.insert(id).second) throw ValidationError("duplicate obs_id '" + id + "' in curves file");
        std::vector<double> row(static_cast<std::size_t>(h));
        bool any = false;
        for (Eigen::Index k = 0; k < h; ++k) {
            const std::string& cell = cells[static_cast<std::size_t>(k + 1)];
            if (is_missing(cell)) {
                row[static_cast<std::size_t>(k)] = std::numeric_limits<double>::quiet_NaN();
            } else {
                row[static_cast<std::size_t>(k)] = parse_number(cell, "curve value for '" + id + "'");
                any = true;
            }
        }
        if (!any) throw ValidationError("curve for obs_id '" + id + "' has no observed values");
        table.obs_ids.push_back(id);
        rows.push_back(std::move(row));
    }
    table.values.resize(static_cast<Eigen::Index>(rows.size()), h);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (Eigen::Index k = 0; k < h; ++k) table.values(static_cast<Eigen::Index>(r), k) = rows[r][static_cast<std::size_t>(k)];
    }
    return table;
}

CurveTable read_curves(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_curves(in);
}

IngestedData ingest(std::istream& responses, std::istream& curves) {
    CurveTable table = read_curves(curves);
    std::unordered_map<std::string, Eigen::Index> curve_row;
    for (std::size_t r = 0; r < table.obs_ids.size(); ++r) curve_row.emplace(table.obs_ids[r], static_cast<Eigen::Index>(r));

    std::string line;
    if (!next_line(responses, line)) throw ValidationError("responses file is empty");
    const auto header = split_csv_line(line);
    if (header != std::vector<std::string>{"cluster_id", "obs_id", "t", "y"}) {
        throw ValidationError("responses header must be cluster_id,obs_id,t,y");
    }

    IngestedData out;
    auto& data = out.dataset;
    std::unordered_map<std::string, std::size_t> cluster_index;
    std::unordered_set<std::string> used;
    int line_no = 1;
    while (next_line(responses, line)) {
        ++line_no;
        const auto cells = split_csv_line(line);
        const std::string where = "responses line " + std::to_string(line_no);
        if (cells.size() != 4) throw ValidationError(where + " must have 4 cells");
        const std::string& cid = cells[0];
        const std::string& oid = cells[1];
        if (cid.empty() || oid.empty()) throw ValidationError(where + " has an empty id");
        if (!used.insert(oid).second) throw ValidationError("duplicate obs_id '" + oid + "' in responses file");
        const auto it = curve_row.find(oid);
        if (it == curve_row.end()) throw ValidationError("obs_id '" + oid + "' has no curve row");
        Observation obs;
        obs.obs_id = oid;
        obs.t = parse_number(cells[2], where + " t");
        obs.y = parse_number(cells[3], where + " y");
        if (!std::isfinite(obs.t) || !std::isfinite(obs.y)) throw ValidationError(where + " has a non-finite t or y");
        obs.curve_row = it->second;
        auto [pos, inserted] = cluster_index.emplace(cid, data.clusters.size());
        if (inserted) data.clusters.push_back({cid, {}});
        data.clusters[pos->second].observations.push_back(std::move(obs));
    }
    for (const auto& id : table.obs_ids) {
        if (!used.count(id)) throw ValidationError("obs_id '" + id + "' in curves file has no response row");
    }
    if (data.clusters.size() < 2) throw ValidationError("dataset needs at least 2 clusters");

    out.sample.grid = table.grid;
    out.sample.values = table.values;
    out.sample.obs_ids = table.obs_ids;
    data.grid = table.grid;
    data.curves = table.values;
    return out;
}

IngestedData ingest(const std::filesystem::path& responses_path, const std::filesystem::path& curves_path) {
    auto r = open_input(responses_path);
    auto c = open_input(curves_path);
    return ingest(r, c);
}

void write_responses(std::ostream& out, const LongitudinalDataset& data, const std::vector<std::string>& obs_ids) {
    out << "cluster_id,obs_id,t,y\n";
    for (const auto& c : data.clusters) {
        for (const auto& o : c.observations) {
            const std::string& id = obs_ids.empty() ? o.obs_id : obs_ids[static_cast<std::size_t>(o.curve_row)];
            out << csv_cell(c.cluster_id) << ',' << csv_cell(id) << ',' << format_number(o.t) << ','
                << format_number(o.y) << '\n';
        }
    }
}

void write_curves(std::ostream& out, const CurveTable& table) {
    out << "obs_id";
    for (Eigen::Index k = 0; k < table.grid.size(); ++k) out << ',' << format_number(table.grid[k]);
    out << '\n';
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        out << csv_cell(table.obs_ids[static_cast<std::size_t>(r)]);
        for (Eigen::Index k = 0; k < table.values.cols(); ++k) out << ',' << format_number(table.values(r, k));
        out << '\n';
    }
}

void write_dataset(std::ostream& responses, std::ostream& curves, const IngestedData& data) {
    write_responses(responses, data.dataset);
    write_curves(curves, {data.sample.grid, data.sample.values, data.sample.obs_ids});
}

}  // namespace fqr
