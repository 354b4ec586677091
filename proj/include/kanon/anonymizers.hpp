#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "kanon/data_model.hpp"
#include "kanon/information_loss.hpp"
#include "kanon/rng.hpp"

namespace kanon {

struct Partition {
    std::vector<std::size_t> member_indices;
    std::vector<Cell> generalized_qi_cells; // one per quasi-identifier, schema order
};

struct AnonymizationRun {
    Algorithm algorithm = Algorithm::bm;
    int requested_k = 0;
    std::vector<Partition> partitions;
    Dataset output;
    double gcp = 0.0;
    std::uint64_t seed = 0;
};

/// TDGA splits a group only while it holds at least this many multiples of k.
inline constexpr std::size_t kTdgaSplitFactor = 2;
/// Farthest-pair refinement rounds when TDGA picks its two split seeds.
inline constexpr int kTdgaSeedRounds = 3;

namespace detail {

inline void check_preconditions(const Dataset& d, int k, const char* who) {
    if (k < 2) throw Error(std::string(who) + ": k must be >= 2");
    if (d.z() == 0) throw Error(std::string(who) + ": dataset has no quasi-identifiers");
    if (d.n() < static_cast<std::size_t>(k))
        throw Error(std::string(who) + ": n = " + std::to_string(d.n()) + " is smaller than k = " + std::to_string(k));
}

inline std::vector<Cell> generalize_members(const Dataset& d, std::span<const std::size_t> members) {
    if (members.empty()) throw Error("generalize_group: empty group");
    std::vector<Cell> out;
    for (std::size_t c : d.schema->qi_indices()) {
        const auto& attr = d.schema->attributes[c];
        if (attr.is_numeric()) {
            double lo = 0.0, hi = 0.0;
            bool first = true;
            for (std::size_t i : members) {
                auto b = numeric_bounds(d.records[i].values[c]);
                if (!b) throw Error("generalize_group: non-numeric cell in '" + attr.name + "'");
                if (first) lo = b->lo, hi = b->hi, first = false;
                lo = std::min(lo, b->lo);
                hi = std::max(hi, b->hi);
            }
            out.push_back(lo == hi ? Cell{lo} : Cell{Interval{lo, hi}});
            continue;
        }
        const Taxonomy* tax = d.schema->taxonomy_for(attr);
        if (!tax) throw Error("generalize_group: no taxonomy for '" + attr.name + "'");
        const Cell& first_cell = d.records[members.front()].values[c];
        bool uniform = true;
        Taxonomy::NodeId acc = tax->id_of(render_cell(first_cell));
        for (std::size_t i : members) {
            const Cell& cell = d.records[i].values[c];
            uniform = uniform && cell == first_cell;
            acc = tax->lca(acc, tax->id_of(render_cell(cell)));
        }
        if (uniform) out.push_back(first_cell);
        else out.push_back(NodeLabel{tax->node(acc).label});
    }
    return out;
}

inline AnonymizationRun assemble(const Dataset& d, int k, Algorithm alg, std::uint64_t seed,
                                 std::vector<std::vector<std::size_t>> groups) {
    AnonymizationRun run;
    run.algorithm = alg;
    run.requested_k = k;
    run.seed = seed;
    run.output = Dataset{d.schema, d.records, Provenance::anonymized(alg, k)};

    const QiSpace space(d);
    const auto qis = d.schema->qi_indices();
    std::vector<std::size_t> sizes;
    std::vector<double> ncps;
    for (auto& g : groups) {
        std::sort(g.begin(), g.end());
        GroupSpan span(space);
        for (std::size_t i : g) span.add(i);
        sizes.push_back(g.size());
        ncps.push_back(span.ncp());

        Partition p{std::move(g), {}};
        p.generalized_qi_cells = generalize_members(d, p.member_indices);
        for (std::size_t i : p.member_indices)
            for (std::size_t q = 0; q < qis.size(); ++q) run.output.records[i].values[qis[q]] = p.generalized_qi_cells[q];
        run.partitions.push_back(std::move(p));
    }
    run.gcp = weighted_gcp(sizes, ncps, d.n());
    return run;
}

/// Index of the member of `pool` farthest from `from` by pair NCP; the first
/// one wins ties. `from` itself is never returned unless it is alone.
inline std::size_t farthest(const QiSpace& space, std::size_t from, std::span<const std::size_t> pool) {
    std::size_t best = pool.front() == from && pool.size() > 1 ? pool[1] : pool.front();
    double best_d = -1.0;
    for (std::size_t x : pool) {
        if (x == from) continue;
        const double dist = GroupSpan::pair_ncp(space, from, x);
        if (dist > best_d) best_d = dist, best = x;
    }
    return best;
}

} // namespace detail

/// Generalizes a group: numeric quasi-identifiers become the [min, max]
/// interval (a single value stays a number), categorical ones the LCA label.
inline std::vector<Cell> generalize_group(const Dataset& d, std::span<const std::size_t> members) {
    return detail::generalize_members(d, members);
}

inline std::vector<Cell> generalize_group(std::span<const Record> group, std::shared_ptr<const Schema> schema) {
    Dataset tmp{std::move(schema), {group.begin(), group.end()}, {}};
    std::vector<std::size_t> all(group.size());
    std::iota(all.begin(), all.end(), 0);
    return detail::generalize_members(tmp, all);
}

// ---------------------------------------------------------------------------
// Basic Mondrian (strict, median cuts)

/// Recursive median partitioning. At each node the quasi-identifiers are
/// tried widest normalized span first; a cut is taken only when both halves
/// keep at least k records.
inline AnonymizationRun mondrian_anonymize(const Dataset& d, int k) {
    detail::check_preconditions(d, k, "mondrian_anonymize");
    const QiSpace space(d);
    const std::size_t kk = static_cast<std::size_t>(k);

    // Split key per record and dimension: numeric midpoint or leaf position.
    auto key = [&](std::size_t i, std::size_t q) -> double {
        if (space.dim(q).numeric) return (space.lo(i, q) + space.hi(i, q)) / 2.0;
        return static_cast<double>(space.dim(q).taxonomy->node(space.node(i, q)).first_leaf);
    };
    auto normalized_span = [&](std::span<const std::size_t> members, std::size_t q) {
        double lo = key(members.front(), q), hi = lo;
        for (std::size_t i : members) {
            lo = std::min(lo, space.dim(q).numeric ? space.lo(i, q) : key(i, q));
            hi = std::max(hi, space.dim(q).numeric ? space.hi(i, q) : key(i, q));
        }
        if (space.dim(q).numeric) return space.numeric_ncp(q, lo, hi);
        return (hi - lo) / static_cast<double>(space.dim(q).taxonomy->leaf_total());
    };

    std::vector<std::vector<std::size_t>> leaves;
    std::vector<std::vector<std::size_t>> stack;
    stack.emplace_back(d.n());
    std::iota(stack.back().begin(), stack.back().end(), 0);

    while (!stack.empty()) {
        auto members = std::move(stack.back());
        stack.pop_back();
        bool cut = false;
        if (members.size() >= 2 * kk) {
            std::vector<std::pair<double, std::size_t>> order;
            for (std::size_t q = 0; q < space.dims(); ++q) order.emplace_back(normalized_span(members, q), q);
            std::stable_sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.first > b.first; });
            for (auto [span, q] : order) {
                if (span <= 0.0) break;
                std::vector<double> keys;
                keys.reserve(members.size());
                for (std::size_t i : members) keys.push_back(key(i, q));
                std::vector<double> sorted = keys;
                const std::size_t mid = (sorted.size() - 1) / 2;
                std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
                const double median = sorted[mid];
                std::vector<std::size_t> left, right;
                for (std::size_t j = 0; j < members.size(); ++j) (keys[j] <= median ? left : right).push_back(members[j]);
                if (left.size() >= kk && right.size() >= kk) {
                    stack.push_back(std::move(right));
                    stack.push_back(std::move(left));
                    cut = true;
                    break;
                }
            }
        }
        if (!cut) leaves.push_back(std::move(members));
    }
    return detail::assemble(d, k, Algorithm::bm, 0, std::move(leaves));
}

// ---------------------------------------------------------------------------
// Top-down greedy anonymization

inline AnonymizationRun tdga_anonymize(const Dataset& d, int k, std::uint64_t seed) {
    detail::check_preconditions(d, k, "tdga_anonymize");
    const QiSpace space(d);
    const std::size_t kk = static_cast<std::size_t>(k);
    Rng rng(seed);

    std::vector<std::vector<std::size_t>> finals;
    std::vector<std::vector<std::size_t>> stack;
    stack.emplace_back(d.n());
    std::iota(stack.back().begin(), stack.back().end(), 0);

    while (!stack.empty()) {
        auto group = std::move(stack.back());
        stack.pop_back();
        if (group.size() < kTdgaSplitFactor * kk) {
            finals.push_back(std::move(group));
            continue;
        }

        std::size_t u = group[rng.index(group.size())];
        std::size_t v = detail::farthest(space, u, group);
        for (int round = 1; round < kTdgaSeedRounds; ++round) {
            u = detail::farthest(space, v, group);
            v = detail::farthest(space, u, group);
        }
        if (u == v || GroupSpan::pair_ncp(space, u, v) <= 0.0) {
            // Every record carries the same quasi-identifier values.
            finals.push_back(std::move(group));
            continue;
        }

        std::vector<std::size_t> left{u}, right{v};
        GroupSpan left_span(space, u), right_span(space, v);
        for (std::size_t x : group) {
            if (x == u || x == v) continue;
            const double dl = left_span.ncp_with(x) - left_span.ncp();
            const double dr = right_span.ncp_with(x) - right_span.ncp();
            const bool to_left = dl < dr || (dl == dr && left.size() <= right.size());
            (to_left ? left : right).push_back(x);
            (to_left ? left_span : right_span).add(x);
        }

        // Balance: top up an undersized side from the larger one, choosing
        // the record that widens the small side least.
        auto* small = &left;
        auto* large = &right;
        auto* small_span = &left_span;
        if (left.size() > right.size()) std::swap(small, large), small_span = &right_span;
        bool merged = false;
        while (small->size() < kk) {
            if (large->size() <= kk) {
                merged = true;
                break;
            }
            std::size_t best = 0;
            double best_inc = 0.0;
            for (std::size_t j = 0; j < large->size(); ++j) {
                const double inc = small_span->ncp_with((*large)[j]);
                if (j == 0 || inc < best_inc) best_inc = inc, best = j;
            }
            small->push_back((*large)[best]);
            small_span->add((*large)[best]);
            large->erase(large->begin() + static_cast<std::ptrdiff_t>(best));
        }
        if (merged) {
            finals.push_back(std::move(group));
            continue;
        }
        std::sort(left.begin(), left.end());
        std::sort(right.begin(), right.end());
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
    }
    return detail::assemble(d, k, Algorithm::tdga, seed, std::move(finals));
}

// ---------------------------------------------------------------------------
// Clustering-based (k-member greedy)

inline AnonymizationRun cba_anonymize(const Dataset& d, int k, std::uint64_t seed) {
    detail::check_preconditions(d, k, "cba_anonymize");
    const QiSpace space(d);
    const std::size_t kk = static_cast<std::size_t>(k);
    Rng rng(seed);

    std::vector<std::size_t> unassigned(d.n());
    std::iota(unassigned.begin(), unassigned.end(), 0);
    auto take = [&](std::size_t pos) {
        const std::size_t x = unassigned[pos];
        unassigned.erase(unassigned.begin() + static_cast<std::ptrdiff_t>(pos));
        return x;
    };

    std::vector<std::vector<std::size_t>> clusters;
    std::vector<GroupSpan> spans;
    std::size_t reference = unassigned[rng.index(unassigned.size())];

    while (unassigned.size() >= kk) {
        std::size_t start_pos = 0;
        double best_d = -1.0;
        for (std::size_t p = 0; p < unassigned.size(); ++p) {
            const double dist = GroupSpan::pair_ncp(space, reference, unassigned[p]);
            if (dist > best_d) best_d = dist, start_pos = p;
        }
        std::vector<std::size_t> members{take(start_pos)};
        GroupSpan span(space, members.front());
        while (members.size() < kk) {
            std::size_t best_pos = 0;
            double best_ncp = 0.0;
            for (std::size_t p = 0; p < unassigned.size(); ++p) {
                const double v = span.ncp_with(unassigned[p]);
                if (p == 0 || v < best_ncp) best_ncp = v, best_pos = p;
            }
            const std::size_t x = take(best_pos);
            members.push_back(x);
            span.add(x);
        }

        // Next start is measured from the cluster medoid.
        double best_sum = 0.0;
        for (std::size_t a = 0; a < members.size(); ++a) {
            double sum = 0.0;
            for (std::size_t b = 0; b < members.size(); ++b)
                if (a != b) sum += GroupSpan::pair_ncp(space, members[a], members[b]);
            if (a == 0 || sum < best_sum) best_sum = sum, reference = members[a];
        }
        clusters.push_back(std::move(members));
        spans.push_back(std::move(span));
    }

    for (std::size_t x : unassigned) {
        std::size_t best = 0;
        double best_inc = 0.0;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            const double inc = spans[c].ncp_with(x) - spans[c].ncp();
            if (c == 0 || inc < best_inc) best_inc = inc, best = c;
        }
        clusters[best].push_back(x);
        spans[best].add(x);
    }
    return detail::assemble(d, k, Algorithm::cba, seed, std::move(clusters));
}

inline AnonymizationRun anonymize(const Dataset& d, Algorithm alg, int k, std::uint64_t seed) {
    switch (alg) {
    case Algorithm::bm: return mondrian_anonymize(d, k);
    case Algorithm::tdga: return tdga_anonymize(d, k, seed);
    case Algorithm::cba: return cba_anonymize(d, k, seed);
    }
    throw Error("unknown algorithm");
}

} // namespace kanon
