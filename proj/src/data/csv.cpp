#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tablab/data.hpp"

namespace tablab::data {

namespace {

using Row = std::vector<std::string>;

// RFC-4180-ish: quoted fields may contain delimiters, quotes ("" escape) and
// newlines; CRLF and LF both accepted.
std::vector<Row> tokenize(const std::string& text, char delim) {
    std::vector<Row> rows;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t i = 0;
    const std::size_t len = text.size();
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < len) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < len && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else if (c == '"' && !field_started && field.empty()) {
            in_quotes = true;
            field_started = true;
            ++i;
        } else if (c == delim) {
            end_field();
            ++i;
        } else if (c == '\r') {
            if (i + 1 < len && text[i + 1] == '\n') ++i;
            end_row();
            ++i;
        } else if (c == '\n') {
            end_row();
            ++i;
        } else {
            field += c;
            field_started = true;
            ++i;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field", rows.size() + 1, row.size() + 1);
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

double parse_numeric(const std::string& s, std::size_t row, std::size_t col) {
    double v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e)
        throw ParseError("non-numeric cell '" + s + "' in numeric column", row, col);
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

bool needs_quoting(const std::string& s, char delim) {
    return s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos;
}

std::string quote(const std::string& s, char delim) {
    if (!needs_quoting(s, delim)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

}  // namespace

Dataset load_csv(const std::string& path, const Schema& schema, const CsvOptions& opt) {
    schema.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open csv file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto rows = tokenize(ss.str(), opt.delimiter);
    if (rows.empty()) throw ParseError("empty file", 0, 0);

    const std::size_t d = schema.d();
    std::vector<std::size_t> feature_col(d);
    std::size_t label_col;
    std::size_t first_data_row = 0;

    if (opt.has_header) {
        const Row& header = rows[0];
        if (header.size() != d + 1)
            throw ParseError("header has " + std::to_string(header.size()) + " columns, schema expects " +
                                 std::to_string(d + 1),
                             1, header.size());
        std::unordered_map<std::string, std::size_t> by_name;
        for (std::size_t c = 0; c < header.size(); ++c) by_name[header[c]] = c;
        auto it = by_name.find(opt.label_column);
        if (it == by_name.end()) throw ConfigError("label column '" + opt.label_column + "' not found in header");
        label_col = it->second;
        for (std::size_t j = 0; j < d; ++j) {
            auto fit = by_name.find(schema.features[j].name);
            if (fit == by_name.end())
                throw ConfigError("feature column '" + schema.features[j].name + "' not found in header");
            feature_col[j] = fit->second;
        }
        first_data_row = 1;
    } else {
        for (std::size_t j = 0; j < d; ++j) feature_col[j] = j;
        label_col = d;
    }

    // category name -> index maps, seeded from the schema sidecar when present
    std::vector<std::unordered_map<std::string, std::size_t>> cat_maps(d);
    std::vector<std::vector<std::string>> cat_names(d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < schema.features[j].categories.size(); ++k) {
            cat_maps[j][schema.features[j].categories[k]] = k;
            cat_names[j].push_back(schema.features[j].categories[k]);
        }
    }

    Dataset ds;
    ds.schema = schema;
    const std::size_t nrows = rows.size() - first_data_row;
    ds.n = nrows;
    ds.cells.resize(nrows * d);
    ds.labels.resize(nrows);

    for (std::size_t r = 0; r < nrows; ++r) {
        const Row& row = rows[first_data_row + r];
        const std::size_t file_row = first_data_row + r + 1;
        if (row.size() != d + 1)
            throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " + std::to_string(d + 1),
                             file_row, row.size());
        for (std::size_t j = 0; j < d; ++j) {
            const std::string& cell = row[feature_col[j]];
            const auto& kind = ds.schema.features[j].kind;
            if (kind.is_numeric()) {
                ds.cells[r * d + j] = parse_numeric(cell, file_row, feature_col[j] + 1);
            } else {
                auto it = cat_maps[j].find(cell);
                std::size_t idx;
                if (it != cat_maps[j].end()) {
                    idx = it->second;
                } else {
                    idx = cat_names[j].size();
                    if (idx >= kind.cardinality)
                        throw ParseError("category '" + cell + "' overflows declared cardinality " +
                                             std::to_string(kind.cardinality),
                                         file_row, feature_col[j] + 1);
                    cat_maps[j].emplace(cell, idx);
                    cat_names[j].push_back(cell);
                }
                ds.cells[r * d + j] = static_cast<double>(idx);
            }
        }
        const std::string& lab = row[label_col];
        long lv = 0;
        const char* b = lab.data();
        auto [p, ec] = std::from_chars(b, b + lab.size(), lv);
        if (ec != std::errc() || p != b + lab.size())
            throw ParseError("non-integer label '" + lab + "'", file_row, label_col + 1);
        if (lv < 0 || static_cast<std::size_t>(lv) >= schema.label_classes)
            throw ParseError("label " + std::to_string(lv) + " out of range [0," +
                                 std::to_string(schema.label_classes) + ")",
                             file_row, label_col + 1);
        ds.labels[r] = static_cast<int>(lv);
    }

    for (std::size_t j = 0; j < d; ++j)
        if (!ds.schema.features[j].kind.is_numeric()) ds.schema.features[j].categories = cat_names[j];
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path, const CsvOptions& opt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("cannot write csv file: " + path);
    const std::size_t d = ds.schema.d();
    if (opt.has_header) {
        for (std::size_t j = 0; j < d; ++j) {
            out << quote(ds.schema.features[j].name, opt.delimiter) << opt.delimiter;
        }
        out << quote(opt.label_column, opt.delimiter) << '\n';
    }
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double v = ds.cells[i * d + j];
            const auto& f = ds.schema.features[j];
            if (f.kind.is_numeric()) {
                out << format_double(v);
            } else {
                const auto idx = static_cast<std::size_t>(v);
                if (idx < f.categories.size())
                    out << quote(f.categories[idx], opt.delimiter);
                else
                    out << idx;  // unnamed category, emit the index itself
            }
            out << opt.delimiter;
        }
        out << ds.labels[i] << '\n';
    }
    if (!out) throw StageError("write failed: " + path);
}

Schema schema_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schema parse error: ") + e.what());
    }
    Schema s;
    s.label_classes = j.at("label_classes").get<std::size_t>();
    for (const auto& fj : j.at("features")) {
        Schema::Feature f;
        f.name = fj.at("name").get<std::string>();
        const std::string kind = fj.at("kind").get<std::string>();
        if (kind == "numeric") {
            f.kind = FeatureKind::numeric();
        } else if (kind == "categorical") {
            f.kind = FeatureKind::categorical(fj.at("cardinality").get<std::size_t>());
            if (fj.contains("categories")) f.categories = fj["categories"].get<std::vector<std::string>>();
        } else {
            throw ConfigError("unknown feature kind: " + kind);
        }
        s.features.push_back(std::move(f));
    }
    s.validate();
    return s;
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schema file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return schema_from_json(ss.str());
}

std::string schema_to_json(const Schema& schema) {
    nlohmann::json j;
    j["label_classes"] = schema.label_classes;
    j["features"] = nlohmann::json::array();
    for (const auto& f : schema.features) {
        nlohmann::json fj;
        fj["name"] = f.name;
        if (f.kind.is_numeric()) {
            fj["kind"] = "numeric";
        } else {
            fj["kind"] = "categorical";
            fj["cardinality"] = f.kind.cardinality;
            if (!f.categories.empty()) fj["categories"] = f.categories;
        }
        j["features"].push_back(std::move(fj));
    }
    return j.dump(2);
}

void save_schema(const Schema& schema, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw StageError("cannot write schema file: " + path);
    out << schema_to_json(schema) << '\n';
}

}  // namespace tablab::data
