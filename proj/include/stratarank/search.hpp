#pragma once

#include <map>
#include <string>
#include <vector>

#include "stratarank/design.hpp"

namespace stratarank {

struct SearchSpace {
    int k = 3;
    int p = 1;                  // number of defining words
    long run_budget = 1 << 10;  // 2^{k-p} must fit
    int min_word_len = 2;
    bool with_blocks = false;   // one block word over two blocks
    std::string block_stratum = "block";
    int min_block_len = 2;
};

struct Candidate {
    std::vector<Word> words;
    std::vector<Word> block_words;
};

// Every independent generator set (crossed with the allowed block words).
// Exhaustive — the symmetry quotient is applied later, and only when the
// weight vector cannot tell relabeled designs apart.
std::vector<Candidate> enumerate_candidates(const SearchSpace& space);

struct RankedCandidate {
    Candidate candidate;
    double objective = 0.0;          // sum w_E rho(E)
    std::map<Word, double> rho;      // member-level retention
    int resolution = 0;              // 0 = none
    std::string serialized;
};

struct SearchResult {
    DesignSpec best;
    double objective = 0.0;
    std::vector<RankedCandidate> ranked;  // best first
    bool used_symmetry_quotient = false;

    std::string ranked_csv() const;
};

enum class SearchMode { automatic, exhaustive, greedy };

// Weights are keyed by member effects; missing members weigh zero.
// Ranking: objective desc, then generalized resolution desc, then
// lexicographic serialization asc. Automatic mode scans exhaustively up
// to 1e5 candidates and falls back to a word-swap hill-climb beyond.
SearchResult search(const SearchSpace& space, const std::map<Word, double>& weights,
                    int threads = 0, std::size_t top_m = 10,
                    SearchMode mode = SearchMode::automatic);

DesignSpec candidate_design(const SearchSpace& space, const Candidate& c);

// weight helpers for the CLI: "main=1", "order2=0.5", "A=0.2" ...
std::map<Word, double> parse_weights(const std::string& text, int k);

}  // namespace stratarank
