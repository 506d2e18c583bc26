#include "spot/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "spot/errors.hpp"

namespace spot {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

GzslDataset make_benchmark(const BenchmarkSpec& spec) {
    if (spec.n_classes < 4) throw ConfigError("make_benchmark: need at least 4 classes");
    if (spec.feature_dim < spec.d_attr)
        throw ConfigError("make_benchmark: feature_dim must be >= d_attr");
    if (spec.samples_per_class == 0)
        throw ConfigError("make_benchmark: samples_per_class must be positive");
    if (spec.intra_class_noise < 0.0 || spec.inter_class_separation < 0.0)
        throw ConfigError("make_benchmark: noise and separation must be nonnegative");

    Rng rng(spec.seed);
    GzslDataset ds;

    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        AttributeVector attr;
        attr.class_id = static_cast<int>(c);
        attr.attributes.resize(spec.d_attr);
        double norm2 = 0.0;
        for (double& x : attr.attributes) {
            x = rng.normal();
            norm2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : attr.attributes) x *= inv;
        ds.attributes.push_back(std::move(attr));
    }

    // Projected class means sit at scale inter_class_separation.
    const double sigma_proj =
        spec.inter_class_separation / std::sqrt(static_cast<double>(spec.feature_dim));
    ds.projection = Matrix(spec.d_attr, spec.feature_dim);
    for (double& x : ds.projection.data) x = rng.normal(0.0, sigma_proj);

    const std::size_t total = spec.n_classes * spec.samples_per_class;
    ds.features = Matrix(total, spec.feature_dim);
    ds.labels.reserve(total);
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const Matrix center = project_attribute(ds.attributes[c], ds.projection);
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            for (std::size_t j = 0; j < spec.feature_dim; ++j)
                ds.features(row, j) = center(0, j) + rng.normal(0.0, spec.intra_class_noise);
            ds.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(field);
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw ParseError(where + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(where + ": not a number: '" + s + "'");
    }
}

int parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw ParseError(where + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(where + ": not an integer: '" + s + "'");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path, const char* kind) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string(kind) + " file missing or unreadable: '" + path + "'");
    return in;
}

void write_matrix_tsv(std::ofstream& out, const Matrix& m) {
    out << m.rows << '\t' << m.cols << '\n';
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out << '\t';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

Matrix read_matrix_tsv(std::ifstream& in, const std::string& where, std::size_t& line_no) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(where + ": missing matrix header");
    ++line_no;
    const auto header = split_fields(line, '\t');
    if (header.size() != 2)
        throw ParseError(where + " line " + std::to_string(line_no) + ": bad matrix header");
    const int rows = parse_int(header[0], where);
    const int cols = parse_int(header[1], where);
    if (rows < 0 || cols < 0) throw ParseError(where + ": negative matrix shape");
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (std::size_t i = 0; i < m.rows; ++i) {
        if (!std::getline(in, line))
            throw ParseError(where + ": truncated matrix at row " + std::to_string(i));
        ++line_no;
        const auto fields = split_fields(line, '\t');
        if (fields.size() != m.cols)
            throw ParseError(where + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(m.cols) + " columns, got " +
                             std::to_string(fields.size()));
        for (std::size_t j = 0; j < m.cols; ++j)
            m(i, j) = parse_double(fields[j], where + " line " + std::to_string(line_no));
    }
    return m;
}

}  // namespace

void save_dataset(const GzslDataset& dataset, const std::string& path) {
    validate_dataset(dataset);
    {
        std::ofstream out = open_out(path);
        out << "label";
        for (std::size_t j = 0; j < dataset.features.cols; ++j) out << "\tf" << j;
        out << '\n';
        for (std::size_t i = 0; i < dataset.features.rows; ++i) {
            out << dataset.labels[i];
            for (std::size_t j = 0; j < dataset.features.cols; ++j)
                out << '\t' << format_double(dataset.features(i, j));
            out << '\n';
        }
        if (!out) throw IoError("failed writing '" + path + "'");
    }
    {
        std::ofstream out = open_out(path + ".attributes");
        out << "class_id\tattributes...\n";
        for (const auto& attr : dataset.attributes) {
            out << attr.class_id;
            for (double a : attr.attributes) out << '\t' << format_double(a);
            out << '\n';
        }
        if (!out) throw IoError("failed writing '" + path + ".attributes'");
    }
    {
        std::ofstream out = open_out(path + ".projection");
        write_matrix_tsv(out, dataset.projection);
        if (!out) throw IoError("failed writing '" + path + ".projection'");
    }
}

GzslDataset load_dataset(const std::string& path) {
    GzslDataset ds;
    {
        std::ifstream in = open_in(path, "dataset");
        std::string line;
        if (!std::getline(in, line) || line.empty())
            throw ParseError("dataset '" + path + "': empty file");
        const auto header = split_fields(line, '\t');
        if (header.size() < 2 || header[0] != "label")
            throw ParseError("dataset '" + path + "' line 1: bad header");
        const std::size_t dim = header.size() - 1;
        std::vector<double> values;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto fields = split_fields(line, '\t');
            if (fields.size() != dim + 1)
                throw ParseError("dataset '" + path + "' line " + std::to_string(line_no) +
                                 ": expected " + std::to_string(dim + 1) + " columns, got " +
                                 std::to_string(fields.size()));
            ds.labels.push_back(parse_int(fields[0], "dataset line " + std::to_string(line_no)));
            for (std::size_t j = 0; j < dim; ++j)
                values.push_back(
                    parse_double(fields[j + 1], "dataset line " + std::to_string(line_no)));
        }
        if (ds.labels.empty()) throw ParseError("dataset '" + path + "': no samples");
        ds.features = Matrix(ds.labels.size(), dim);
        ds.features.data = std::move(values);
    }
    {
        std::ifstream in = open_in(path + ".attributes", "attribute companion");
        std::string line;
        if (!std::getline(in, line)) throw ParseError("attributes '" + path + "': empty file");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto fields = split_fields(line, '\t');
            if (fields.size() < 2)
                throw ParseError("attributes line " + std::to_string(line_no) + ": too short");
            AttributeVector attr;
            attr.class_id = parse_int(fields[0], "attributes line " + std::to_string(line_no));
            for (std::size_t j = 1; j < fields.size(); ++j)
                attr.attributes.push_back(
                    parse_double(fields[j], "attributes line " + std::to_string(line_no)));
            ds.attributes.push_back(std::move(attr));
        }
    }
    {
        std::ifstream in = open_in(path + ".projection", "projection companion");
        std::size_t line_no = 0;
        ds.projection = read_matrix_tsv(in, "projection '" + path + "'", line_no);
    }
    validate_dataset(ds);
    return ds;
}

namespace {

void write_param_store(std::ostream& out, const ParamStore& ps) {
    out << "params " << ps.size() << '\n';
    for (const auto& [name, m] : ps) {
        out << "matrix " << name << ' ' << m.rows << ' ' << m.cols << '\n';
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (i) out << ' ';
            out << format_double(m.data[i]);
        }
        out << '\n';
    }
}

ParamStore read_param_store(std::istream& in) {
    std::string tag;
    std::size_t count = 0;
    in >> tag >> count;
    if (tag != "params") throw IntegrityError("checkpoint: expected params block");
    ParamStore ps;
    for (std::size_t p = 0; p < count; ++p) {
        std::string name;
        std::size_t rows = 0, cols = 0;
        in >> tag >> name >> rows >> cols;
        if (tag != "matrix") throw IntegrityError("checkpoint: expected matrix block");
        Matrix m(rows, cols);
        for (double& x : m.data) {
            std::string num;
            in >> num;
            x = parse_double(num, "checkpoint matrix " + name);
        }
        ps.add(name, std::move(m));
    }
    if (!in) throw IntegrityError("checkpoint: truncated params block");
    return ps;
}

std::string encode_text(const std::string& text) {
    // Single-line escape so multi-line snapshots survive the line format.
    std::string out;
    for (char c : text) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

std::string decode_text(const std::string& text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            ++i;
            out += text[i] == 'n' ? '\n' : text[i];
        } else {
            out += text[i];
        }
    }
    return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ostringstream payload;
    payload << "version " << ckpt.format_version << '\n';
    payload << "selector_cfg " << ckpt.selector_cfg.feature_dim << ' ' << ckpt.selector_cfg.d_model
            << ' ' << ckpt.selector_cfg.layers << ' ' << ckpt.selector_cfg.heads << ' '
            << ckpt.selector_cfg.ff_hidden << ' ' << ckpt.selector_cfg.ff_layers << '\n';
    write_param_store(payload, ckpt.selector_params);
    payload << "alpha " << format_double(ckpt.alpha) << '\n';
    payload << "ema " << ckpt.ema_state.size();
    for (double q : ckpt.ema_state) payload << ' ' << format_double(q);
    payload << '\n';
    payload << "episodes " << ckpt.episodes_done << '\n';
    payload << "best_q " << format_double(ckpt.best_q_hat) << '\n';
    payload << "stale " << ckpt.stale_count << '\n';
    payload << "rng " << encode_text(ckpt.rng_state) << '\n';
    payload << "config " << encode_text(ckpt.config_snapshot) << '\n';
    payload << "classifier " << (ckpt.has_classifier ? 1 : 0) << '\n';
    if (ckpt.has_classifier) {
        payload << "classes " << ckpt.classifier.class_list.size();
        for (int c : ckpt.classifier.class_list) payload << ' ' << c;
        payload << '\n';
        ParamStore ps;
        ps.add("weight", ckpt.classifier.weight);
        ps.add("bias", ckpt.classifier.bias);
        write_param_store(payload, ps);
    }

    const std::string body = payload.str();
    std::ofstream out = open_out(path);
    out << "spotckpt\n";
    out << "checksum " << fnv1a64(body) << '\n';
    out << body;
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in = open_in(path, "checkpoint");
    std::string magic;
    if (!std::getline(in, magic) || magic != "spotckpt")
        throw IntegrityError("checkpoint '" + path + "': bad magic line");
    std::string checksum_line;
    if (!std::getline(in, checksum_line) || checksum_line.rfind("checksum ", 0) != 0)
        throw IntegrityError("checkpoint '" + path + "': missing checksum");
    const std::uint64_t recorded = std::stoull(checksum_line.substr(9));
    std::ostringstream rest;
    rest << in.rdbuf();
    const std::string body = rest.str();
    if (fnv1a64(body) != recorded)
        throw IntegrityError("checkpoint '" + path + "': checksum mismatch, payload corrupt");

    std::istringstream is(body);
    Checkpoint ckpt;
    std::string tag;
    is >> tag >> ckpt.format_version;
    if (tag != "version") throw IntegrityError("checkpoint: expected version line");
    if (ckpt.format_version > kCheckpointVersion)
        throw VersionError("checkpoint format_version " + std::to_string(ckpt.format_version) +
                           " is newer than supported " + std::to_string(kCheckpointVersion));
    is >> tag >> ckpt.selector_cfg.feature_dim >> ckpt.selector_cfg.d_model >>
        ckpt.selector_cfg.layers >> ckpt.selector_cfg.heads >> ckpt.selector_cfg.ff_hidden >>
        ckpt.selector_cfg.ff_layers;
    if (tag != "selector_cfg") throw IntegrityError("checkpoint: expected selector_cfg");
    is >> std::ws;
    ckpt.selector_params = read_param_store(is);

    std::string num;
    is >> tag >> num;
    if (tag != "alpha") throw IntegrityError("checkpoint: expected alpha");
    ckpt.alpha = parse_double(num, "checkpoint alpha");
    std::size_t ema_count = 0;
    is >> tag >> ema_count;
    if (tag != "ema") throw IntegrityError("checkpoint: expected ema");
    ckpt.ema_state.resize(ema_count);
    for (double& q : ckpt.ema_state) {
        is >> num;
        q = parse_double(num, "checkpoint ema");
    }
    is >> tag >> ckpt.episodes_done;
    if (tag != "episodes") throw IntegrityError("checkpoint: expected episodes");
    is >> tag >> num;
    if (tag != "best_q") throw IntegrityError("checkpoint: expected best_q");
    ckpt.best_q_hat = parse_double(num, "checkpoint best_q");
    is >> tag >> ckpt.stale_count;
    if (tag != "stale") throw IntegrityError("checkpoint: expected stale");
    is >> tag >> std::ws;
    if (tag != "rng") throw IntegrityError("checkpoint: expected rng");
    std::string line;
    std::getline(is, line);
    ckpt.rng_state = decode_text(line);
    is >> tag >> std::ws;
    if (tag != "config") throw IntegrityError("checkpoint: expected config");
    std::getline(is, line);
    ckpt.config_snapshot = decode_text(line);
    int has_clf = 0;
    is >> tag >> has_clf;
    if (tag != "classifier") throw IntegrityError("checkpoint: expected classifier flag");
    ckpt.has_classifier = has_clf != 0;
    if (ckpt.has_classifier) {
        std::size_t n_classes = 0;
        is >> tag >> n_classes;
        if (tag != "classes") throw IntegrityError("checkpoint: expected classes");
        ckpt.classifier.class_list.resize(n_classes);
        for (int& c : ckpt.classifier.class_list) is >> c;
        is >> std::ws;
        ParamStore ps = read_param_store(is);
        ckpt.classifier.weight = ps.at("weight");
        ckpt.classifier.bias = ps.at("bias");
    }
    if (!is) throw IntegrityError("checkpoint '" + path + "': truncated payload");
    return ckpt;
}

double MetricRow::value(const std::string& key) const {
    for (const auto& [k, v] : values)
        if (k == key) return v;
    throw IndexError("metric row '" + model + "' has no value '" + key + "'");
}

bool MetricRow::has(const std::string& key) const {
    for (const auto& [k, v] : values)
        if (k == key) return true;
    return false;
}

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "table") return ReportFormat::table;
    if (s == "records") return ReportFormat::records;
    throw ConfigError("unknown report format '" + s + "'");
}

std::string format_table(const std::vector<MetricRow>& rows) {
    // Column order: fixed well-known metrics first, then anything else in
    // first-appearance order. A metric paired with "<name>_std" renders as
    // one "mean +/- std" cell.
    std::vector<std::string> columns;
    const auto is_std_key = [](const std::string& key) {
        return key.size() > 4 && key.compare(key.size() - 4, 4, "_std") == 0;
    };
    const auto add_column = [&](const std::string& key) {
        if (is_std_key(key)) return;
        if (std::find(columns.begin(), columns.end(), key) == columns.end())
            columns.push_back(key);
    };
    for (const char* key : {"S", "U", "H", "ZSL"})
        for (const auto& row : rows)
            if (row.has(key)) add_column(key);
    for (const auto& row : rows)
        for (const auto& [key, v] : row.values) add_column(key);

    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header{"Model"};
    header.insert(header.end(), columns.begin(), columns.end());
    cells.push_back(header);
    for (const auto& row : rows) {
        std::vector<std::string> line{row.model};
        for (const auto& col : columns) {
            if (!row.has(col)) {
                line.push_back("-");
                continue;
            }
            std::ostringstream os;
            os << std::fixed << std::setprecision(2) << row.value(col);
            if (row.has(col + "_std"))
                os << " +- " << std::fixed << std::setprecision(2) << row.value(col + "_std");
            std::string cell = os.str();
            if (col == "H" && row.has("S") && row.has("U")) {
                const double recomputed = harmonic_mean(row.value("S"), row.value("U"));
                if (std::abs(recomputed - row.value("H")) > 0.05) cell += " !";
            }
            line.push_back(cell);
        }
        cells.push_back(std::move(line));
    }

    std::vector<std::size_t> widths(cells[0].size(), 0);
    for (const auto& line : cells)
        for (std::size_t i = 0; i < line.size(); ++i)
            widths[i] = std::max(widths[i], line[i].size());

    std::ostringstream out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            if (i) out << " | ";
            out << cells[r][i];
            for (std::size_t pad = cells[r][i].size(); pad < widths[i]; ++pad) out << ' ';
        }
        out << '\n';
        if (r == 0) {
            for (std::size_t i = 0; i < widths.size(); ++i) {
                if (i) out << "-+-";
                out << std::string(widths[i], '-');
            }
            out << '\n';
        }
    }
    return out.str();
}

void write_report(const std::vector<MetricRow>& rows, const std::string& path,
                  ReportFormat format) {
    std::ofstream out = open_out(path);
    if (format == ReportFormat::table) {
        out << format_table(rows);
    } else {
        for (const auto& row : rows) {
            for (const auto& [key, v] : row.values) {
                nlohmann::json record;
                record["model"] = row.model;
                record["metric"] = key;
                record["value"] = v;
                record["seed"] = row.seed;
                record["config"] = row.config_hash;
                out << record.dump() << '\n';
            }
        }
    }
    if (!out) throw IoError("failed writing report '" + path + "'");
}

std::vector<MetricRow> parse_records(const std::string& path) {
    std::ifstream in = open_in(path, "records");
    std::vector<MetricRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("records '" + path + "' line " + std::to_string(line_no) + ": " +
                             e.what());
        }
        for (const char* field : {"model", "metric", "value", "seed", "config"})
            if (!record.contains(field))
                throw ParseError("records '" + path + "' line " + std::to_string(line_no) +
                                 ": missing field '" + field + "'");
        const std::string model = record["model"].get<std::string>();
        const auto seed = record["seed"].get<std::uint64_t>();
        const std::string config = record["config"].get<std::string>();
        if (rows.empty() || rows.back().model != model || rows.back().seed != seed ||
            rows.back().config_hash != config) {
            MetricRow row;
            row.model = model;
            row.seed = seed;
            row.config_hash = config;
            rows.push_back(std::move(row));
        }
        rows.back().values.emplace_back(record["metric"].get<std::string>(),
                                        record["value"].get<double>());
    }
    return rows;
}

}  // namespace spot
