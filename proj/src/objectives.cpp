#include "seqdesign/objectives.hpp"

#include <stdexcept>

namespace seqdesign {

double Objective::evaluate(const Sequence& w, const Alphabet& alphabet) const {
    switch (kind) {
        case ObjectiveKind::sheet_fraction: {
            int residues = 0;
            int hits = 0;
            for (int id : w.ids) {
                if (id == alphabet.mask_index() || id == alphabet.pad_index()) continue;
                ++residues;
                if (residue_set.find(alphabet.symbol(id)) != std::string::npos) ++hits;
            }
            return residues == 0 ? 0.0 : static_cast<double>(hits) / residues;
        }
        case ObjectiveKind::motif_count: {
            if (motif.empty()) throw std::invalid_argument("motif_count: empty motif");
            std::vector<int> motif_ids;
            for (char c : motif) {
                const int id = alphabet.index_of(c);
                if (id < 0) throw std::invalid_argument("motif_count: motif symbol not in alphabet");
                motif_ids.push_back(id);
            }
            int count = 0;
            const int m = static_cast<int>(motif_ids.size());
            for (int i = 0; i + m <= w.length(); ++i) {
                bool match = true;
                for (int j = 0; j < m; ++j) {
                    if (w[i + j] != motif_ids[static_cast<size_t>(j)]) {
                        match = false;
                        break;
                    }
                }
                count += match;
            }
            return static_cast<double>(count);
        }
        case ObjectiveKind::planted_linear: {
            if (positions.size() != target_tokens.size() || positions.size() != weights.size()) {
                throw std::invalid_argument("planted_linear: positions/tokens/weights mismatch");
            }
            double total = 0.0;
            for (size_t j = 0; j < positions.size(); ++j) {
                const int p = positions[j];
                if (p < 0 || p >= w.length()) {
                    throw std::invalid_argument("planted_linear: position out of range");
                }
                if (w[p] == target_tokens[j]) total += weights[j];
            }
            return total;
        }
    }
    throw std::logic_error("objective: unknown kind");
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dominates: dimension mismatch");
    bool strictly = false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) return false;
        if (a[i] > b[i]) strictly = true;
    }
    return strictly;
}

std::vector<std::vector<double>> pareto_extract(const std::vector<std::vector<double>>& points) {
    std::vector<std::vector<double>> front;
    for (size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (size_t j = 0; j < points.size() && !dominated; ++j) {
            if (i != j && dominates(points[j], points[i])) dominated = true;
        }
        // Keep one representative of duplicate coordinates.
        if (!dominated) {
            bool duplicate = false;
            for (const auto& kept : front) {
                if (kept == points[i]) {
                    duplicate = true;
                    break;
                }
            }
            if (!duplicate) front.push_back(points[i]);
        }
    }
    return front;
}

} // namespace seqdesign
