#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hybridmap/encoding.hpp"

namespace hybridmap {

enum class ValueMode : uint8_t { low_corr = 0, high_corr = 1 };

struct ValueColumnSpec {
    uint32_t cardinality = 2;
    ValueMode mode = ValueMode::low_corr;
    uint32_t period = 1;     // high_corr: value = pattern[key mod period]
    double noise_rate = 0.0; // fraction of rows re-randomized
};

struct SyntheticSpec {
    uint64_t rows = 0;
    std::vector<ValueColumnSpec> value_columns;
    uint64_t seed = 0;
    // Key domain span = ceil(rows * headroom): keys 0..rows-1 exist, the rest
    // of the domain is guaranteed absent (for NULL-path workloads).
    double domain_headroom = 2.0;
};

struct GeneratedRelation {
    EncodedRelation relation;
    std::vector<double> pearson; // measured key-value correlation per column
};

// Deterministic by seed. Keys are 0..rows-1; low_corr columns are i.i.d.
// uniform; high_corr columns repeat a random pattern of length `period` with
// `noise_rate` of the rows re-randomized.
GeneratedRelation generate(const SyntheticSpec& spec);

// Splits CSV text into header + rows. Supports quoted fields with doubled
// quotes; tolerates CRLF line endings.
RawTable parse_csv(const std::string& text);

// CSV file -> EncodedRelation. Columns whose cells parse as floating point
// but not as integers are rejected (lossless integer coding only).
EncodedRelation ingest_csv(const std::filesystem::path& path,
                           const std::vector<std::string>& key_columns);

} // namespace hybridmap
