// SPDX-License-Identifier: Apache-2.0
#include "pbdw/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace pbdw {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

bool parse_double(const std::string& text, double& out)
{
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_index(const std::string& text, long long& out)
{
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, out);
    return ec == std::errc() && ptr == end;
}

Vec from_std(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())); }

double json_number(const nlohmann::json& value)
{
    return value.is_null() ? kInfinity : value.get<double>();
}

void check_hash(const nlohmann::json& doc, std::uint64_t system_hash, const fs::path& file)
{
    if (doc.value("system_hash", std::uint64_t{0}) != system_hash)
        throw InvalidInput(file.string() + ": fitted for a different model or sensor configuration");
}

}  // namespace

std::string format_number(double value)
{
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, ptr);
}

std::vector<Observation> ingest_observations(const fs::path& path, const MeasurementSystem& system)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput(path.string() + ": cannot open");
    const auto fail = [&](std::size_t line, const std::string& what) {
        throw InvalidInput(path.string() + ":" + std::to_string(line) + ": " + what);
    };

    std::string line;
    std::size_t line_no = 0;
    bool with_sample = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> header = split_csv(line);
        for (auto& h : header) h = trim(h);
        if (header == std::vector<std::string>{"sensor_id", "value"}) break;
        if (header == std::vector<std::string>{"sample", "sensor_id", "value"}) {
            with_sample = true;
            break;
        }
        fail(line_no, "expected header 'sensor_id,value' or 'sample,sensor_id,value'");
    }
    if (line_no == 0) throw InvalidInput(path.string() + ": empty file");

    const Index m = system.m();
    std::map<long long, std::vector<std::pair<long long, double>>> samples;
    std::map<long long, std::size_t> first_line;
    const std::size_t width = with_sample ? 3 : 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != width)
            fail(line_no, "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
        long long sample = 0;
        long long id = 0;
        double value = 0.0;
        if (with_sample && !parse_index(fields[0], sample)) fail(line_no, "sample is not an integer");
        if (!parse_index(fields[width - 2], id)) fail(line_no, "sensor_id is not an integer");
        if (!parse_double(fields[width - 1], value)) fail(line_no, "value is not a number");
        if (id < 0 || id >= m)
            fail(line_no, "sensor_id " + std::to_string(id) + " out of range: expected m = " + std::to_string(m) +
                              " sensors (ids 0.." + std::to_string(m - 1) + ")");
        first_line.emplace(sample, line_no);
        samples[sample].emplace_back(id, value);
    }
    if (samples.empty()) throw InvalidInput(path.string() + ": no observations");

    std::vector<Observation> out;
    for (const auto& [sample, entries] : samples) {
        const std::size_t at = first_line[sample];
        if (static_cast<Index>(entries.size()) != m)
            fail(at, "sample " + std::to_string(sample) + ": expected m = " + std::to_string(m) + " values, found " +
                         std::to_string(entries.size()));
        Vec raw = Vec::Constant(m, std::numeric_limits<double>::quiet_NaN());
        for (const auto& [id, value] : entries) {
            if (!std::isnan(raw(id)))
                fail(at, "sample " + std::to_string(sample) + ": sensor_id " + std::to_string(id) + " repeated");
            raw(id) = value;
        }
        out.push_back(observation_from_raw(system, raw));
    }
    return out;
}

void export_observations(const fs::path& path, const std::vector<Observation>& observations)
{
    std::ostringstream out;
    const bool single = observations.size() == 1;
    out << (single ? "sensor_id,value\n" : "sample,sensor_id,value\n");
    for (std::size_t s = 0; s < observations.size(); ++s)
        for (Index i = 0; i < observations[s].raw.size(); ++i) {
            if (!single) out << s << ',';
            out << i << ',' << format_number(observations[s].raw(i)) << '\n';
        }
    write_text(path, out.str());
}

void write_matrix(const fs::path& path, const Mat& matrix)
{
    std::ostringstream out;
    out << "# matrix " << matrix.rows() << ' ' << matrix.cols() << '\n';
    for (Index i = 0; i < matrix.rows(); ++i) {
        for (Index j = 0; j < matrix.cols(); ++j) out << (j ? "," : "") << format_number(matrix(i, j));
        out << '\n';
    }
    write_text(path, out.str());
}

Mat read_matrix(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw InvalidInput(path.string() + ": cannot open");
    std::string line;
    std::getline(in, line);
    std::istringstream head(line);
    std::string hash, tag;
    long long rows = -1, cols = -1;
    head >> hash >> tag >> rows >> cols;
    if (hash != "#" || tag != "matrix" || rows < 0 || cols < 0)
        throw InvalidInput(path.string() + ":1: expected '# matrix <rows> <cols>'");
    Mat m(rows, cols);
    for (long long i = 0; i < rows; ++i) {
        const std::string where = path.string() + ":" + std::to_string(i + 2) + ": ";
        if (!std::getline(in, line)) throw InvalidInput(where + "missing row");
        const auto fields = cols == 0 ? std::vector<std::string>{} : split_csv(line);
        if (static_cast<long long>(fields.size()) != cols)
            throw InvalidInput(where + "expected " + std::to_string(cols) + " fields, found " +
                               std::to_string(fields.size()));
        for (long long j = 0; j < cols; ++j)
            if (!parse_double(fields[j], m(i, j))) throw InvalidInput(where + "field " + std::to_string(j + 1) + " is not a number");
    }
    return m;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput(path.string() + ": cannot write");
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput(path.string() + ": cannot open");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

nlohmann::json read_json(const fs::path& path)
{
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

std::vector<std::string> affine_map_files() { return {"map.json", "z.csv", "b.csv", "complement.csv"}; }

void save_affine_map(const fs::path& dir, const AffineRecoveryMap& map, std::uint64_t system_hash)
{
    nlohmann::json doc{{"system_hash", system_hash},
                       {"m", map.m()},
                       {"p", map.p()},
                       {"training_objective", map.training_objective},
                       {"eta", map.eta},
                       {"b_norm", map.b_norm()},
                       {"net_delta", map.net_delta},
                       {"net_delta_estimated", map.net_delta_estimated},
                       {"iterations", map.diagnostics.iterations},
                       {"primal", map.diagnostics.primal},
                       {"dual", map.diagnostics.dual},
                       {"certified", map.diagnostics.certified}};
    write_text(dir / "map.json", doc.dump(2) + "\n");
    write_matrix(dir / "z.csv", map.z);
    write_matrix(dir / "b.csv", map.b_matrix);
    write_matrix(dir / "complement.csv", map.complement_basis);
}

AffineRecoveryMap load_affine_map(const fs::path& dir, std::uint64_t system_hash)
{
    const nlohmann::json doc = read_json(dir / "map.json");
    check_hash(doc, system_hash, dir / "map.json");
    AffineRecoveryMap map;
    map.z = read_matrix(dir / "z.csv").col(0);
    map.b_matrix = read_matrix(dir / "b.csv");
    map.complement_basis = read_matrix(dir / "complement.csv");
    if (map.b_matrix.rows() != map.z.size() || map.complement_basis.cols() != map.z.size())
        throw InvalidInput(dir.string() + ": inconsistent map dimensions");
    map.training_objective = doc.at("training_objective").get<double>();
    map.eta = doc.at("eta").get<double>();
    map.net_delta = json_number(doc.at("net_delta"));
    map.net_delta_estimated = doc.at("net_delta_estimated").get<bool>();
    map.diagnostics.iterations = doc.at("iterations").get<int>();
    map.diagnostics.primal = doc.at("primal").get<double>();
    map.diagnostics.dual = doc.at("dual").get<double>();
    map.diagnostics.certified = doc.at("certified").get<bool>();
    return map;
}

std::vector<std::string> partition_files(const PartitionedModel& pm)
{
    std::vector<std::string> files{"partition.json"};
    for (Index k = 0; k < pm.k(); ++k) {
        files.push_back("cell_" + std::to_string(k) + "_anchor.csv");
        files.push_back("cell_" + std::to_string(k) + "_basis.csv");
    }
    return files;
}

void save_partition(const fs::path& dir, const PartitionedModel& pm, std::uint64_t system_hash)
{
    nlohmann::json doc = pm.to_json();
    doc["system_hash"] = system_hash;
    doc["surrogate"] = {{"kkt_tol", pm.surrogate.kkt_tol}, {"max_iter", pm.surrogate.max_iter}};
    for (Index k = 0; k < pm.k(); ++k) doc["cells"][k]["training_size"] = pm.cells[k].training_size;
    write_text(dir / "partition.json", doc.dump(2) + "\n");
    for (Index k = 0; k < pm.k(); ++k) {
        write_matrix(dir / ("cell_" + std::to_string(k) + "_anchor.csv"), pm.cells[k].local_space.anchor);
        write_matrix(dir / ("cell_" + std::to_string(k) + "_basis.csv"), pm.cells[k].local_space.basis);
    }
}

PartitionedModel load_partition(const fs::path& dir, const MeasurementSystem& system, std::uint64_t system_hash)
{
    const nlohmann::json doc = read_json(dir / "partition.json");
    check_hash(doc, system_hash, dir / "partition.json");
    PartitionedModel pm;
    pm.target_eps = doc.at("target_eps").get<double>();
    pm.complete = doc.at("complete").get<bool>();
    pm.worst_certificate = json_number(doc.at("worst_certificate"));
    pm.surrogate.kkt_tol = doc.at("surrogate").at("kkt_tol").get<double>();
    pm.surrogate.max_iter = doc.at("surrogate").at("max_iter").get<int>();
    const auto& cells = doc.at("cells");
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        Cell cell;
        cell.box = {from_std(c.at("lo").get<std::vector<double>>()), from_std(c.at("hi").get<std::vector<double>>())};
        cell.local_space.anchor = read_matrix(dir / ("cell_" + std::to_string(k) + "_anchor.csv")).col(0);
        cell.local_space.basis = read_matrix(dir / ("cell_" + std::to_string(k) + "_basis.csv"));
        cell.local_space.eps = c.at("eps").get<double>();
        cell.local_space.provenance = "loaded from " + dir.string();
        if (cell.local_space.anchor.size() != system.space().dim() || cell.local_space.basis.rows() != system.space().dim())
            throw InvalidInput(dir.string() + ": cell " + std::to_string(k) + " does not match the model dimension");
        cell.certificate = json_number(c.at("certificate"));
        cell.depth = c.at("depth").get<int>();
        cell.accepted = c.at("accepted").get<bool>();
        cell.training_size = c.at("training_size").get<std::size_t>();
        if (!std::isinf(json_number(c.at("mu")))) cell.local_map.emplace(cell.local_space, system);
        pm.cells.push_back(std::move(cell));
    }
    for (const auto& s : doc.at("splits"))
        pm.split_trace.push_back({s.at("order").get<std::size_t>(), s.at("depth").get<int>(), s.at("coord").get<Index>(),
                                  s.at("scores").get<std::vector<double>>()});
    return pm;
}

}  // namespace pbdw
