#include "ventgate/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "ventgate/rng.hpp"

namespace ventgate {

SplitAssignment assign_splits(std::vector<std::string> ids, uint64_t seed, double train_frac,
                              double val_frac) {
    if (train_frac <= 0 || val_frac <= 0 || train_frac + val_frac >= 1.0)
        throw std::invalid_argument("CONFIG_RANGE: split fractions must be positive and sum < 1");
    Rng rng(seed);
    rng.shuffle(ids);
    const size_t n = ids.size();
    const size_t n_train = static_cast<size_t>(std::llround(train_frac * static_cast<double>(n)));
    const size_t n_val = static_cast<size_t>(std::llround(val_frac * static_cast<double>(n)));
    if (n_train + n_val > n) throw std::invalid_argument("CONFIG_RANGE: splits exceed cohort");

    SplitAssignment s;
    s.train.assign(ids.begin(), ids.begin() + n_train);
    s.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    s.test.assign(ids.begin() + n_train + n_val, ids.end());
    return s;
}

using ojson = nlohmann::ordered_json;

std::string split_to_json(const SplitAssignment& s) {
    ojson j;
    j["train"] = s.train;
    j["val"] = s.val;
    j["test"] = s.test;
    return j.dump(2) + "\n";
}

SplitAssignment split_from_json(const std::string& text) {
    const ojson j = ojson::parse(text);
    SplitAssignment s;
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
}

RowDataset build_row_dataset(const std::vector<EncounterRows>& encounters,
                             const CxrEmbeddingTable* table, const SplitAssignment& split) {
    enum Split : int { TRAIN = 0, VAL = 1, TEST = 2 };
    std::unordered_map<std::string, int> split_of;
    for (const auto& id : split.train) split_of[id] = TRAIN;
    for (const auto& id : split.val) {
        if (split_of.count(id)) throw std::invalid_argument("SPLIT_LEAKAGE: " + id + " in two splits");
        split_of[id] = VAL;
    }
    for (const auto& id : split.test) {
        if (split_of.count(id)) throw std::invalid_argument("SPLIT_LEAKAGE: " + id + " in two splits");
        split_of[id] = TEST;
    }

    RowDataset ds;
    ds.z_dim = table ? table->dim : 0;

    for (const auto& er : encounters) {
        const FeatureMatrix& fm = *er.fm;
        const auto it = split_of.find(fm.encounter_id);
        if (it == split_of.end())
            throw std::invalid_argument("SPLIT_MISSING: " + fm.encounter_id + " not assigned");
        const uint32_t enc_idx = static_cast<uint32_t>(ds.encounter_ids.size());
        ds.encounter_ids.push_back(fm.encounter_id);

        auto push_row = [&](size_t row, const std::vector<float>* emb) {
            const uint32_t r = static_cast<uint32_t>(ds.n_rows());
            ds.x.insert(ds.x.end(), &fm.values[row * kFeatureCount],
                        &fm.values[row * kFeatureCount] + kFeatureCount);
            ds.dt.insert(ds.dt.end(), &fm.tslm[row * kDynamicCount],
                         &fm.tslm[row * kDynamicCount] + kDynamicCount);
            if (table) ds.z.insert(ds.z.end(), emb->begin(), emb->end());
            ds.y.push_back(fm.labels[row]);
            ds.timestamps.push_back(fm.timestamps[row]);
            ds.encounter_of_row.push_back(enc_idx);
            switch (it->second) {
                case TRAIN: ds.train_rows.push_back(r); break;
                case VAL: ds.val_rows.push_back(r); break;
                default: ds.test_rows.push_back(r); break;
            }
        };

        if (table) {
            if (!er.aligned)
                throw std::invalid_argument("MISALIGNED: embeddings given without alignment");
            for (const auto& a : *er.aligned) {
                const auto emb = table->entries.find(a.embedding_key);
                if (emb == table->entries.end())
                    throw std::runtime_error("UNRESOLVED_KEY: no embedding for " + a.embedding_key);
                push_row(a.row, &emb->second);
            }
        } else {
            for (size_t row = 0; row < fm.rows(); ++row) push_row(row, nullptr);
        }
    }
    return ds;
}

}  // namespace ventgate
