#pragma once

#include <map>
#include <string>
#include <vector>

#include "ventgate/cohort.hpp"
#include "ventgate/features.hpp"

namespace ventgate {

constexpr double kCxrLookbackHours = 72.0;  // applies to non-ICU studies only

struct CxrEmbeddingTable {
    uint32_t dim = 0;
    std::map<std::string, std::vector<float>> entries;  // key -> embedding, length dim
    std::string encoder_name;                           // free-text provenance tag
};

struct AlignedSample {
    std::string encounter_id;
    size_t row = 0;  // index into the encounter's FeatureMatrix
    double timestamp = 0.0;
    std::string study_id;
    std::string embedding_key;
    double embedding_age_hours = 0.0;
};

// Match each prediction row to the newest study acquired at or before it.
// ICU studies persist for the whole encounter; a non-ICU study qualifies only
// when no ICU study precedes the row and its age is within 72 hours. Rows
// without a match are omitted. Equal acquisition times resolve to the
// lexicographically smallest study_id.
std::vector<AlignedSample> align(const Encounter& e, const FeatureMatrix& fm,
                                 const CxrEmbeddingTable& table);

// ---- embedding file ------------------------------------------------------------

std::string embeddings_to_bytes(const CxrEmbeddingTable& table);
CxrEmbeddingTable embeddings_from_bytes(const std::string& bytes);

// The encoder name travels in a text sidecar next to the binary table.
void save_embeddings(const std::string& path, const CxrEmbeddingTable& table);
CxrEmbeddingTable load_embeddings(const std::string& path);

}  // namespace ventgate
