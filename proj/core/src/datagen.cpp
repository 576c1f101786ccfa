#include "hybridmap/datagen.hpp"

#include <charconv>
#include <cmath>

#include "hybridmap/prng.hpp"

namespace hybridmap {

namespace {

double pearson_key_value(const std::vector<uint32_t>& codes) {
    size_t n = codes.size();
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (size_t r = 0; r < n; ++r) {
        double x = static_cast<double>(r);
        double y = static_cast<double>(codes[r]);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    double dn = static_cast<double>(n);
    double cov = sxy - sx * sy / dn;
    double vx = sxx - sx * sx / dn;
    double vy = syy - sy * sy / dn;
    if (vx <= 0 || vy <= 0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

bool parses_as_i64(const std::string& s) {
    int64_t v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parses_as_double(const std::string& s) {
    double v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
}

} // namespace

GeneratedRelation generate(const SyntheticSpec& spec) {
    if (spec.rows == 0) throw EmptyDataset("generate: rows = 0");
    if (spec.value_columns.empty()) throw EmptyDataset("generate: no value columns");
    for (size_t j = 0; j < spec.value_columns.size(); ++j) {
        const auto& col = spec.value_columns[j];
        if (col.cardinality == 0)
            throw Error("generate: column " + std::to_string(j) + " cardinality 0");
        if (col.mode == ValueMode::high_corr && col.period == 0)
            throw Error("generate: column " + std::to_string(j) + " period 0");
        if (col.noise_rate < 0.0 || col.noise_rate > 1.0)
            throw Error("generate: column " + std::to_string(j) + " noise_rate outside [0,1]");
    }
    if (spec.domain_headroom < 1.0) throw Error("generate: domain_headroom < 1");

    uint64_t n = spec.rows;
    uint64_t span = static_cast<uint64_t>(std::ceil(static_cast<double>(n) * spec.domain_headroom));
    if (span < n) span = n;

    GeneratedRelation out;
    EncodedRelation& rel = out.relation;
    rel.key_codec = KeyCodec({KeyComponent{"key", 0, span}});
    rel.keys.resize(n);
    for (uint64_t k = 0; k < n; ++k) rel.keys[k] = k;

    size_t m = spec.value_columns.size();
    rel.value_columns.resize(m);
    rel.columns.resize(m);
    out.pearson.resize(m);
    for (size_t j = 0; j < m; ++j) {
        const auto& cs = spec.value_columns[j];
        ColumnSchema& schema = rel.value_columns[j];
        schema.name = "v" + std::to_string(j);
        schema.kind = ColumnKind::value;
        schema.dictionary.resize(cs.cardinality);
        for (uint32_t c = 0; c < cs.cardinality; ++c) schema.dictionary[c] = std::to_string(c);

        Rng rng(derive_seed(spec.seed, 1000 + j));
        auto& codes = rel.columns[j];
        codes.resize(n);
        if (cs.mode == ValueMode::high_corr) {
            std::vector<uint32_t> pattern(cs.period);
            for (auto& v : pattern) v = static_cast<uint32_t>(rng.bounded(cs.cardinality));
            for (uint64_t r = 0; r < n; ++r) {
                uint32_t v = pattern[r % cs.period];
                // unit() is in (0,1], so noise 0 never rewrites and 1 always does
                if (rng.unit() <= cs.noise_rate)
                    v = static_cast<uint32_t>(rng.bounded(cs.cardinality));
                codes[r] = v;
            }
        } else {
            for (uint64_t r = 0; r < n; ++r)
                codes[r] = static_cast<uint32_t>(rng.bounded(cs.cardinality));
        }
        out.pearson[j] = pearson_key_value(codes);
    }
    return out;
}

RawTable parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    size_t i = 0, n = text.size();
    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };
    while (i < n) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
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
        } else if (c == '"' && field.empty()) {
            in_quotes = true;
            ++i;
        } else if (c == ',') {
            end_field();
            ++i;
        } else if (c == '\r') {
            ++i;
        } else if (c == '\n') {
            end_record();
            ++i;
        } else {
            field += c;
            ++i;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted field");
    if (!field.empty() || !record.empty()) end_record();

    if (records.empty()) throw ParseError("empty csv");
    RawTable table;
    table.column_names = std::move(records.front());
    table.rows.assign(std::make_move_iterator(records.begin() + 1),
                      std::make_move_iterator(records.end()));
    return table;
}

EncodedRelation ingest_csv(const std::filesystem::path& path,
                           const std::vector<std::string>& key_columns) {
    if (!std::filesystem::exists(path)) throw ParseError("cannot open " + path.string());
    RawTable table = parse_csv(read_text_file(path));

    // reject floating point before encoding: a cell that parses as a double
    // but not as an integer marks the whole column
    for (size_t c = 0; c < table.column_names.size(); ++c) {
        for (size_t r = 0; r < table.rows.size(); ++r) {
            if (table.rows[r].size() != table.column_names.size()) break; // encode reports ragged rows
            const std::string& cell = table.rows[r][c];
            if (parses_as_double(cell) && !parses_as_i64(cell))
                throw FloatColumnRejected("column " + table.column_names[c] + " (row " +
                                          std::to_string(r) + ": \"" + cell + "\")");
        }
    }
    return encode_relation(table, key_columns);
}

} // namespace hybridmap
