#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ventgate/cxr.hpp"
#include "ventgate/features.hpp"
#include "ventgate/nn.hpp"

namespace ventgate {

// Flat row-level training table built from per-encounter feature matrices,
// optionally restricted to CXR-aligned rows with their embeddings attached.
struct RowDataset {
    uint32_t z_dim = 0;
    std::vector<float> x;     // rows x kFeatureCount
    std::vector<float> dt;    // rows x kDynamicCount
    std::vector<float> z;     // rows x z_dim, empty when no embeddings
    std::vector<uint8_t> y;
    std::vector<double> timestamps;
    std::vector<uint32_t> encounter_of_row;
    std::vector<std::string> encounter_ids;
    std::vector<uint32_t> train_rows, val_rows, test_rows;

    size_t n_rows() const { return y.size(); }
    bool has_embeddings() const { return z_dim > 0; }
    SampleView view(size_t row) const {
        SampleView s;
        s.x = &x[row * kFeatureCount];
        s.dt = &dt[row * kDynamicCount];
        s.z = z.empty() ? nullptr : &z[row * z_dim];
        return s;
    }
};

struct SplitAssignment {
    std::vector<std::string> train, val, test;
};

// Seeded encounter-level split; fractions of the shuffled id list, remainder
// to test.
SplitAssignment assign_splits(std::vector<std::string> ids, uint64_t seed, double train_frac,
                              double val_frac);

std::string split_to_json(const SplitAssignment& s);
SplitAssignment split_from_json(const std::string& text);

struct EncounterRows {
    const FeatureMatrix* fm = nullptr;
    const std::vector<AlignedSample>* aligned = nullptr;  // null -> keep every row
};

// When `table` is given, only aligned rows enter and carry their embedding;
// otherwise all rows enter with no imaging channel. Every encounter id must
// appear in exactly one split.
RowDataset build_row_dataset(const std::vector<EncounterRows>& encounters,
                             const CxrEmbeddingTable* table, const SplitAssignment& split);

}  // namespace ventgate
