#pragma once

#include <string>
#include <vector>

#include "seqdesign/seqcore.hpp"

namespace seqdesign {

enum class ObjectiveKind { sheet_fraction, motif_count, planted_linear };

// Deterministic, pure scalar function of a sequence.
struct Objective {
    std::string name;
    ObjectiveKind kind = ObjectiveKind::sheet_fraction;

    // sheet_fraction: fraction of residues drawn from this set. Pads and
    // masks are excluded from both numerator and denominator.
    std::string residue_set = "EMAL";

    // motif_count: occurrences of the motif (overlaps counted).
    std::string motif;

    // planted_linear: weighted count of target-token matches at hidden
    // positions.
    std::vector<int> positions;
    std::vector<int> target_tokens;
    std::vector<double> weights;

    double evaluate(const Sequence& w, const Alphabet& alphabet) const;
};

// Non-dominated subset under maximization. Order of survivors follows the
// input order.
std::vector<std::vector<double>> pareto_extract(const std::vector<std::vector<double>>& points);

// True if a dominates b (>= everywhere, > somewhere), maximization.
bool dominates(const std::vector<double>& a, const std::vector<double>& b);

} // namespace seqdesign
