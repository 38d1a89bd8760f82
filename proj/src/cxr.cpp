#include "ventgate/cxr.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "ventgate/util.hpp"

namespace ventgate {

std::vector<AlignedSample> align(const Encounter& e, const FeatureMatrix& fm,
                                 const CxrEmbeddingTable& table) {
    std::vector<AlignedSample> out;
    out.reserve(fm.rows());

    for (size_t row = 0; row < fm.rows(); ++row) {
        const double t = fm.timestamps[row];

        const CxrStudy* best = nullptr;
        bool have_icu = false;
        for (const auto& s : e.cxr_studies) {
            if (s.source != CxrSource::ICU || s.acquired_at > t) continue;
            have_icu = true;
            if (!best || s.acquired_at > best->acquired_at ||
                (s.acquired_at == best->acquired_at && s.study_id < best->study_id))
                best = &s;
        }
        if (!have_icu) {
            for (const auto& s : e.cxr_studies) {
                if (s.source != CxrSource::OTHER_DEPT || s.acquired_at > t) continue;
                if (t - s.acquired_at > kCxrLookbackHours) continue;
                if (!best || s.acquired_at > best->acquired_at ||
                    (s.acquired_at == best->acquired_at && s.study_id < best->study_id))
                    best = &s;
            }
        }
        if (!best) continue;

        if (!table.entries.count(best->embedding_key))
            throw std::runtime_error("UNRESOLVED_KEY: no embedding for " + best->embedding_key);

        AlignedSample a;
        a.encounter_id = e.encounter_id;
        a.row = row;
        a.timestamp = t;
        a.study_id = best->study_id;
        a.embedding_key = best->embedding_key;
        a.embedding_age_hours = t - best->acquired_at;
        out.push_back(std::move(a));
    }
    return out;
}

// ---- embedding file ------------------------------------------------------------
//
// magic "CXRE", u32 entry count, u32 dim, then per entry:
// u16 key length, key bytes, dim 32-bit floats. Keys stored sorted.

namespace {
constexpr char kCxreMagic[4] = {'C', 'X', 'R', 'E'};
}

std::string embeddings_to_bytes(const CxrEmbeddingTable& table) {
    std::string out;
    out.append(kCxreMagic, 4);
    put_u32(out, static_cast<uint32_t>(table.entries.size()));
    put_u32(out, table.dim);
    for (const auto& [key, vec] : table.entries) {
        if (vec.size() != table.dim)
            throw std::runtime_error("INVALID_DIM: entry " + key + " has wrong length");
        if (key.size() > 0xffff) throw std::runtime_error("INVALID_KEY: key too long");
        put_u16(out, static_cast<uint16_t>(key.size()));
        out += key;
        for (float v : vec) put_f32(out, v);
    }
    return out;
}

CxrEmbeddingTable embeddings_from_bytes(const std::string& bytes) {
    ByteReader in(bytes);
    const std::string magic = in.bytes(4);
    if (std::memcmp(magic.data(), kCxreMagic, 4) != 0)
        throw std::runtime_error("BAD_MAGIC: not an embedding table file");
    const uint32_t count = in.u32();
    const uint32_t dim = in.u32();
    if (dim == 0) throw std::runtime_error("INVALID_DIM: embedding dimension is zero");

    CxrEmbeddingTable table;
    table.dim = dim;
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t len = in.u16();
        const std::string key = in.bytes(len);
        std::vector<float> vec(dim);
        for (uint32_t j = 0; j < dim; ++j) {
            vec[j] = in.f32();
            if (!std::isfinite(vec[j]))
                throw std::runtime_error("INVALID_DIM: non-finite embedding value in " + key);
        }
        table.entries.emplace(key, std::move(vec));
    }
    if (!in.at_end()) throw std::runtime_error("TRUNCATED: trailing bytes in embedding file");
    return table;
}

void save_embeddings(const std::string& path, const CxrEmbeddingTable& table) {
    write_file(path, embeddings_to_bytes(table));
    write_file(path + ".encoder.txt", table.encoder_name + "\n");
}

CxrEmbeddingTable load_embeddings(const std::string& path) {
    CxrEmbeddingTable table = embeddings_from_bytes(read_file(path));
    try {
        std::string name = read_file(path + ".encoder.txt");
        while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) name.pop_back();
        table.encoder_name = name;
    } catch (const std::runtime_error&) {
        // sidecar optional on load
    }
    return table;
}

}  // namespace ventgate
