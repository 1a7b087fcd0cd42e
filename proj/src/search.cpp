#include "stratarank/search.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "stratarank/csv.hpp"
#include "stratarank/df_table.hpp"
#include "stratarank/metrics.hpp"
#include "stratarank/parse.hpp"
#include "stratarank/threads.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stratarank {

namespace {

bool independent(const std::vector<Word>& words) {
    // no word inside the closure of the others
    std::set<Word> closure{0};
    for (Word w : words) {
        if (closure.count(w)) return false;
        std::set<Word> next = closure;
        for (Word c : closure) next.insert(c ^ w);
        closure = std::move(next);
    }
    return true;
}

void enumerate_word_sets(const SearchSpace& space, Word from, Word max_word,
                         std::vector<Word>& current,
                         std::vector<std::vector<Word>>& out) {
    if (static_cast<int>(current.size()) == space.p) {
        out.push_back(current);
        return;
    }
    for (Word w = from; w <= max_word; ++w) {
        if (word_order(w) < space.min_word_len) continue;
        current.push_back(w);
        if (independent(current)) enumerate_word_sets(space, w + 1, max_word, current, out);
        current.pop_back();
    }
}

// relabel-invariant signature: sorted multiset of word lengths of the full
// closure plus the block-word lengths
std::string symmetry_signature(const Candidate& c) {
    const AliasIdeal ideal = AliasIdeal::from_generators(c.words);
    std::vector<int> lens;
    for (Word w : ideal.closure)
        if (w != 0) lens.push_back(word_order(w));
    std::sort(lens.begin(), lens.end());
    std::string sig = "w";
    for (int l : lens) sig += std::to_string(l) + ".";
    std::vector<int> block_lens;
    for (Word b : c.block_words) {
        // block word length within the quotient: shortest member of its coset
        int best = word_order(b);
        for (Word a : ideal.closure) best = std::min(best, word_order(b ^ a));
        block_lens.push_back(best);
    }
    std::sort(block_lens.begin(), block_lens.end());
    sig += "b";
    for (int l : block_lens) sig += std::to_string(l) + ".";
    return sig;
}

bool weights_are_order_symmetric(const std::map<Word, double>& weights) {
    std::map<int, std::set<double>> by_order;
    for (const auto& [w, v] : weights) by_order[word_order(w)].insert(v);
    for (const auto& [order, vals] : by_order)
        if (vals.size() > 1) return false;
    return true;
}

}  // namespace

std::vector<Candidate> enumerate_candidates(const SearchSpace& space) {
    if (space.k < 1 || space.k > 8)
        throw SemanticError("exhaustive search supports k <= 8");
    if (space.p < 0 || space.p >= space.k)
        throw SemanticError("need 0 <= p < k defining words");
    const long runs = 1L << (space.k - space.p);
    if (runs > space.run_budget)
        throw SemanticError("2^{k-p} runs exceed the run budget");

    const Word max_word = (Word{1} << space.k) - 1;
    std::vector<std::vector<Word>> word_sets;
    if (space.p == 0) {
        word_sets.push_back({});
    } else {
        std::vector<Word> current;
        enumerate_word_sets(space, 1, max_word, current, word_sets);
    }

    std::vector<Candidate> out;
    for (const auto& words : word_sets) {
        if (!space.with_blocks) {
            out.push_back({words, {}});
            continue;
        }
        const AliasIdeal ideal = AliasIdeal::from_generators(words);
        for (Word b = 1; b <= max_word; ++b) {
            if (word_order(b) < space.min_block_len) continue;
            if (ideal.contains(b)) continue;  // would confound the mean
            out.push_back({words, {b}});
        }
    }
    return out;
}

DesignSpec candidate_design(const SearchSpace& space, const Candidate& c) {
    std::vector<int> levels(space.k, 2);
    DesignSpec spec = make_factorial(levels, 1, c.words, c.block_words,
                                     space.block_stratum);
    spec.name = "candidate";
    return spec;
}

namespace {

bool ranked_before(const RankedCandidate& a, const RankedCandidate& b) {
    if (a.objective != b.objective) return a.objective > b.objective;
    if (a.resolution != b.resolution) return a.resolution > b.resolution;
    return a.serialized < b.serialized;
}

// candidates differing from the incumbent in at most one defining word or
// one block word
bool within_one_swap(const Candidate& a, const Candidate& b) {
    int diff = 0;
    for (Word w : a.words) {
        bool found = false;
        for (Word v : b.words) found |= v == w;
        if (!found) ++diff;
    }
    if (a.block_words.size() != b.block_words.size()) return false;
    for (std::size_t i = 0; i < a.block_words.size(); ++i)
        if (a.block_words[i] != b.block_words[i]) ++diff;
    return diff <= 1;
}

}  // namespace

SearchResult search(const SearchSpace& space, const std::map<Word, double>& weights,
                    int threads, std::size_t top_m, SearchMode mode) {
    for (const auto& [w, v] : weights)
        if (v < 0.0) throw SemanticError("negative effect weight");

    std::vector<Candidate> candidates = enumerate_candidates(space);
    SearchResult result;

    // quotient by relabeling only when the weights cannot distinguish
    // relabeled designs
    if (weights_are_order_symmetric(weights)) {
        std::set<std::string> seen;
        std::vector<Candidate> kept;
        for (const Candidate& c : candidates)
            if (seen.insert(symmetry_signature(c)).second) kept.push_back(c);
        if (kept.size() < candidates.size()) {
            candidates = std::move(kept);
            result.used_symmetry_quotient = true;
        }
    }

    auto evaluate = [&](const Candidate& c) {
        RankedCandidate rc;
        rc.candidate = c;
        const DesignSpec spec = candidate_design(space, c);
        const DfTable table = partition_table(spec);
        double objective = 0.0;
        for (const MemberRetention& m : member_retention(spec, table)) {
            rc.rho[m.member] = m.rho;
            auto it = weights.find(m.member);
            if (it != weights.end()) objective += it->second * m.rho;
        }
        rc.objective = objective;
        rc.resolution = resolution(spec, table).r.value_or(space.k + 1);
        rc.serialized = serialize_design(spec);
        return rc;
    };

    std::vector<RankedCandidate> ranked;
    const bool use_greedy = mode == SearchMode::greedy ||
                            (mode == SearchMode::automatic && candidates.size() > 100000);
    if (use_greedy) {
        // word-swap hill climb from the first candidate
        if (candidates.empty()) throw SemanticError("search space is empty");
        RankedCandidate incumbent = evaluate(candidates.front());
        ranked.push_back(incumbent);
        for (bool improved = true; improved;) {
            improved = false;
            for (const Candidate& c : candidates) {
                if (!within_one_swap(incumbent.candidate, c)) continue;
                RankedCandidate rc = evaluate(c);
                if (ranked_before(rc, incumbent)) {
                    incumbent = rc;
                    ranked.push_back(std::move(rc));
                    improved = true;
                }
            }
        }
    } else {
        ranked.resize(candidates.size());
        const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(nt)
#endif
        for (long i = 0; i < static_cast<long>(candidates.size()); ++i)
            ranked[i] = evaluate(candidates[i]);
    }

    std::sort(ranked.begin(), ranked.end(), ranked_before);
    if (ranked.empty()) throw SemanticError("search space is empty");

    result.objective = ranked.front().objective;
    result.best = candidate_design(space, ranked.front().candidate);
    if (ranked.size() > top_m) ranked.resize(top_m);
    result.ranked = std::move(ranked);

    // the reported objective is recomputed independently at report time
    {
        const DfTable table = partition_table(result.best);
        double check = 0.0;
        for (const MemberRetention& m : member_retention(result.best, table)) {
            auto it = weights.find(m.member);
            if (it != weights.end()) check += it->second * m.rho;
        }
        result.objective = check;
    }
    return result;
}

std::string SearchResult::ranked_csv() const {
    std::ostringstream out;
    out << "rank,objective,resolution,words,block_words\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const RankedCandidate& rc = ranked[i];
        out << (i + 1) << ',' << fmt_double(rc.objective) << ',' << rc.resolution
            << ',';
        std::vector<std::string> names;
        for (int f = 0; f < 26; ++f) names.push_back(std::string(1, char('A' + f)));
        for (std::size_t w = 0; w < rc.candidate.words.size(); ++w)
            out << (w ? " " : "") << word_name(rc.candidate.words[w], names);
        out << ',';
        for (std::size_t w = 0; w < rc.candidate.block_words.size(); ++w)
            out << (w ? " " : "") << word_name(rc.candidate.block_words[w], names);
        out << '\n';
    }
    return out.str();
}

std::map<Word, double> parse_weights(const std::string& text, int k) {
    std::map<Word, double> raw;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        const auto eq = cur.find('=');
        if (eq == std::string::npos)
            throw SemanticError("weights need NAME=value pairs");
        const std::string name = cur.substr(0, eq);
        const double v = std::stod(cur.substr(eq + 1));
        const Word all = (Word{1} << k) - 1;
        if (name == "main") {
            for (int f = 0; f < k; ++f) raw[Word{1} << f] += v;
        } else if (name == "all") {
            for (Word w = 1; w <= all; ++w) raw[w] += v;
        } else if (name.rfind("order", 0) == 0) {
            const int order = std::stoi(name.substr(5));
            for (Word w = 1; w <= all; ++w)
                if (word_order(w) == order) raw[w] += v;
        } else {
            Word w = 0;
            for (char c : name) {
                if (c < 'A' || c >= 'A' + k)
                    throw SemanticError("weight names unknown factor " + name);
                w ^= Word{1} << (c - 'A');
            }
            raw[w] += v;
        }
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') flush();
        else if (c != ' ') cur += c;
    }
    flush();
    double sum = 0.0;
    for (const auto& [w, v] : raw) sum += v;
    if (sum <= 0.0) throw SemanticError("weights must be positive");
    for (auto& [w, v] : raw) v /= sum;
    return raw;
}

}  // namespace stratarank
