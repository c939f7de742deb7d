#pragma once
// TSV ingestion and serialization.
//
// All files are UTF-8, TAB-separated, with `#`-prefixed comment lines.
// Formats:
//   dataset:        feature <TAB> bias <TAB> clicks <TAB> impressions
//   bias features:  bias <TAB> v1,v2,...,vF
//   value table:    r|o <TAB> identifier <TAB> value        (models, ground truth)
//   queries:        query_id <TAB> feature <TAB> relevance_level

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ultr/dataset.hpp"

namespace ultr {

struct BiasFeatureTable {
    std::size_t dimension = 0;
    std::map<std::string, std::vector<double>> rows;

    bool contains(std::string_view bias) const {
        return rows.find(std::string(bias)) != rows.end();
    }
    const std::vector<double>& at(std::string_view bias) const {
        auto it = rows.find(std::string(bias));
        if (it == rows.end()) {
            throw std::out_of_range("no bias feature vector for '" + std::string(bias) +
                                    "'");
        }
        return it->second;
    }
};

// r/o keyed value tables; carries trained models and simulator ground truth.
struct ValueTable {
    std::map<std::string, double> relevance;
    std::map<std::string, double> observation;
};

struct QueryDoc {
    std::string feature;
    int level = 0;
};

struct QuerySet {
    // query id -> document list in file order
    std::vector<std::pair<std::string, std::vector<QueryDoc>>> queries;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline bool skippable(const std::string& line) {
    return line.empty() || line[0] == '#';
}

[[noreturn]] inline void fail_at(const std::string& path, std::size_t lineno,
                                 const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + what);
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& path,
                               std::size_t lineno) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        fail_at(path, lineno, "expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

inline double parse_double(const std::string& s, const std::string& path,
                           std::size_t lineno) {
    try {
        std::size_t consumed = 0;
        const double v = std::stod(s, &consumed);
        if (consumed != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) fail_at(path, lineno, "non-finite value '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        fail_at(path, lineno, "expected a number, got '" + s + "'");
    }
}

inline std::string chomp(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) {
        std::filesystem::create_directories(dir);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace detail

inline Dataset load_dataset(const std::string& path) {
    auto in = detail::open_input(path);
    DatasetBuilder builder;
    std::string line;
    std::size_t lineno = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::chomp(line);
        if (detail::skippable(line)) continue;
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 4) {
            detail::fail_at(path, lineno,
                            "expected 'feature<TAB>bias<TAB>clicks<TAB>impressions'");
        }
        if (fields[0].empty() || fields[1].empty()) {
            detail::fail_at(path, lineno, "empty identifier");
        }
        const std::uint64_t clicks = detail::parse_u64(fields[2], path, lineno);
        const std::uint64_t impressions = detail::parse_u64(fields[3], path, lineno);
        if (impressions == 0) detail::fail_at(path, lineno, "impressions must be >= 1");
        if (clicks > impressions) {
            detail::fail_at(path, lineno, "clicks (" + fields[2] + ") exceed impressions (" +
                                              fields[3] + ")");
        }
        builder.add(fields[0], fields[1], clicks, impressions);
        ++rows;
    }
    if (rows == 0) throw std::runtime_error(path + ": dataset file has no records");
    return builder.build();
}

inline void save_dataset(const std::string& path, const Dataset& d) {
    auto out = detail::open_output(path);
    out << "# feature\tbias\tclicks\timpressions\n";
    for (const auto& r : d.records()) {
        out << d.feature_name(r.feature) << '\t' << d.bias_name(r.bias) << '\t'
            << r.clicks << '\t' << r.impressions << '\n';
    }
}

// `companion` (optional) is used to flag bias ids that the table covers but
// the dataset never saw; those are warnings, not errors.
inline BiasFeatureTable load_bias_features(const std::string& path,
                                           const Dataset* companion = nullptr,
                                           std::vector<std::string>* warnings = nullptr) {
    auto in = detail::open_input(path);
    BiasFeatureTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::chomp(line);
        if (detail::skippable(line)) continue;
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 2 || fields[0].empty()) {
            detail::fail_at(path, lineno, "expected 'bias<TAB>v1,v2,...'");
        }
        std::vector<double> values;
        for (const auto& piece : detail::split(fields[1], ',')) {
            values.push_back(detail::parse_double(piece, path, lineno));
        }
        if (values.empty()) detail::fail_at(path, lineno, "empty feature vector");
        if (table.dimension == 0) {
            table.dimension = values.size();
        } else if (values.size() != table.dimension) {
            detail::fail_at(path, lineno,
                            "feature vector has dimension " + std::to_string(values.size()) +
                                ", expected " + std::to_string(table.dimension));
        }
        if (!table.rows.emplace(fields[0], std::move(values)).second) {
            detail::fail_at(path, lineno, "duplicate bias id '" + fields[0] + "'");
        }
        if (companion && warnings && !companion->find_bias(fields[0])) {
            warnings->push_back("bias id '" + fields[0] +
                                "' has features but never occurs in the dataset");
        }
    }
    return table;
}

inline void save_bias_features(const std::string& path, const BiasFeatureTable& table) {
    auto out = detail::open_output(path);
    out << "# bias\tfeatures\n";
    char buf[64];
    for (const auto& [bias, values] : table.rows) {
        out << bias << '\t';
        for (std::size_t i = 0; i < values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", values[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\n';
    }
}

inline ValueTable load_value_table(const std::string& path) {
    auto in = detail::open_input(path);
    ValueTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::chomp(line);
        if (detail::skippable(line)) continue;
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 3 || (fields[0] != "r" && fields[0] != "o")) {
            detail::fail_at(path, lineno, "expected 'r|o<TAB>id<TAB>value'");
        }
        const double v = detail::parse_double(fields[2], path, lineno);
        auto& dst = fields[0] == "r" ? table.relevance : table.observation;
        dst[fields[1]] = v;
    }
    return table;
}

inline void save_value_table(const std::string& path, const ValueTable& table) {
    auto out = detail::open_output(path);
    out << "# kind\tid\tvalue\n";
    char buf[64];
    for (const auto& [id, v] : table.relevance) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << "r\t" << id << '\t' << buf << '\n';
    }
    for (const auto& [id, v] : table.observation) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << "o\t" << id << '\t' << buf << '\n';
    }
}

inline QuerySet load_queries(const std::string& path) {
    auto in = detail::open_input(path);
    QuerySet qs;
    std::map<std::string, std::size_t> slot;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::chomp(line);
        if (detail::skippable(line)) continue;
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 3) {
            detail::fail_at(path, lineno, "expected 'query<TAB>feature<TAB>level'");
        }
        const auto level = static_cast<int>(detail::parse_u64(fields[2], path, lineno));
        auto [it, inserted] = slot.try_emplace(fields[0], qs.queries.size());
        if (inserted) qs.queries.push_back({fields[0], {}});
        qs.queries[it->second].second.push_back(QueryDoc{fields[1], level});
    }
    return qs;
}

inline void save_queries(const std::string& path, const QuerySet& qs) {
    auto out = detail::open_output(path);
    out << "# query\tfeature\tlevel\n";
    for (const auto& [qid, docs] : qs.queries) {
        for (const auto& doc : docs) {
            out << qid << '\t' << doc.feature << '\t' << doc.level << '\n';
        }
    }
}

}  // namespace ultr
