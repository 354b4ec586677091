#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kanon/data_model.hpp"

namespace kanon {

// Normalized Certainty Penalty.
//   numeric:     (group max - group min) / (domain max - domain min)
//   categorical: 0 when the group covers a single leaf, otherwise
//                leaves(lca of the group) / leaves(root)
// A group's NCP is the unweighted mean over quasi-identifiers; the global
// penalty (GCP) is the record-weighted mean over groups.

struct LossBreakdown {
    std::map<std::string, double> per_attribute_ncp;
    double group_ncp = 0.0;
    double gcp = 0.0;
};

inline double ncp_numeric(double group_min, double group_max, double domain_min, double domain_max) {
    if (!(domain_min < domain_max)) throw Error("ncp_numeric: zero-width domain");
    if (group_min > group_max || group_min < domain_min || group_max > domain_max)
        throw Error("ncp_numeric: group span must lie inside the domain");
    return (group_max - group_min) / (domain_max - domain_min);
}

inline double ncp_categorical_node(const Taxonomy& t, Taxonomy::NodeId lca_node) {
    const auto covered = t.node(lca_node).leaf_count;
    if (covered <= 1) return 0.0;
    return static_cast<double>(covered) / static_cast<double>(t.node(t.root()).leaf_count);
}

template <class Range>
double ncp_categorical(const Taxonomy& t, const Range& values) {
    auto it = std::begin(values);
    if (it == std::end(values)) throw Error("ncp_categorical: empty value set");
    Taxonomy::NodeId acc = t.id_of(*it);
    for (++it; it != std::end(values); ++it) acc = t.lca(acc, t.id_of(*it));
    return ncp_categorical_node(t, acc);
}

inline double ncp_categorical(const Taxonomy& t, std::initializer_list<std::string_view> values) {
    return ncp_categorical<std::initializer_list<std::string_view>>(t, values);
}

/// NCP of one attribute over a group of records.
inline double attribute_ncp(const Schema& schema, std::size_t column, std::span<const Record> group) {
    if (group.empty()) throw Error("attribute_ncp: empty group");
    const auto& attr = schema.attributes.at(column);
    if (attr.is_numeric()) {
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (const auto& r : group) {
            auto b = numeric_bounds(r.values[column]);
            if (!b) throw Error("attribute_ncp: non-numeric cell in '" + attr.name + "'");
            if (first) lo = b->lo, hi = b->hi, first = false;
            lo = std::min(lo, b->lo);
            hi = std::max(hi, b->hi);
        }
        const auto dom = attr.numeric_domain.value_or(NumericDomain{lo, hi});
        if (!(dom.min < dom.max)) return 0.0; // constant column
        return ncp_numeric(lo, hi, dom.min, dom.max);
    }
    const Taxonomy* tax = schema.taxonomy_for(attr);
    if (!tax) throw Error("attribute_ncp: no taxonomy for '" + attr.name + "'");
    std::vector<std::string> labels;
    labels.reserve(group.size());
    for (const auto& r : group) labels.push_back(render_cell(r.values[column]));
    return ncp_categorical(*tax, labels);
}

inline LossBreakdown group_breakdown(std::span<const Record> group, const Schema& schema) {
    if (group.empty()) throw Error("group_ncp: empty group");
    LossBreakdown out;
    const auto qis = schema.qi_indices();
    double sum = 0.0;
    for (std::size_t c : qis) {
        const double v = attribute_ncp(schema, c, group);
        out.per_attribute_ncp[schema.attributes[c].name] = v;
        sum += v;
    }
    out.group_ncp = qis.empty() ? 0.0 : sum / static_cast<double>(qis.size());
    out.gcp = out.group_ncp;
    return out;
}

inline double group_ncp(std::span<const Record> group, const Schema& schema) {
    return group_breakdown(group, schema).group_ncp;
}

/// sum(|g| * ncp(g)) / n over precomputed group sizes and penalties.
inline double weighted_gcp(std::span<const std::size_t> sizes, std::span<const double> ncps, std::size_t n) {
    if (sizes.size() != ncps.size()) throw Error("weighted_gcp: size/ncp length mismatch");
    std::size_t total = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        total += sizes[i];
        acc += static_cast<double>(sizes[i]) * ncps[i];
    }
    if (total != n) throw Error("gcp: group sizes sum to " + std::to_string(total) + ", expected " + std::to_string(n));
    return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

inline double gcp_dataset(std::span<const std::vector<Record>> groups, std::size_t n, const Schema& schema) {
    std::vector<std::size_t> sizes;
    std::vector<double> ncps;
    for (const auto& g : groups) {
        sizes.push_back(g.size());
        ncps.push_back(group_ncp(g, schema));
    }
    return weighted_gcp(sizes, ncps, n);
}

/// GCP of a partition given as index lists into `records`.
inline double gcp_of_partition(std::span<const Record> records, std::span<const std::vector<std::size_t>> groups,
                               const Schema& schema) {
    std::vector<std::size_t> sizes;
    std::vector<double> ncps;
    std::vector<Record> tmp;
    for (const auto& g : groups) {
        tmp.clear();
        for (std::size_t i : g) tmp.push_back(records[i]);
        sizes.push_back(g.size());
        ncps.push_back(group_ncp(tmp, schema));
    }
    return weighted_gcp(sizes, ncps, records.size());
}

// ---------------------------------------------------------------------------
// Incremental form used by the anonymizers. Each record is encoded once into
// per-quasi-identifier numeric bounds or taxonomy node ids, and a GroupSpan
// keeps the running min/max or LCA so NCP changes cost O(z).

class QiSpace {
public:
    struct Dim {
        std::size_t column = 0;
        bool numeric = true;
        NumericDomain domain;
        const Taxonomy* taxonomy = nullptr;
    };

    QiSpace(const Dataset& d) : records_(d.n()) {
        for (std::size_t c : d.schema->qi_indices()) {
            const auto& attr = d.schema->attributes[c];
            Dim dim{c, attr.is_numeric(), attr.numeric_domain.value_or(NumericDomain{}), nullptr};
            if (!dim.numeric) {
                dim.taxonomy = d.schema->taxonomy_for(attr);
                if (!dim.taxonomy) throw Error("no taxonomy for quasi-identifier '" + attr.name + "'");
            }
            dims_.push_back(dim);
        }
        lo_.resize(records_ * dims_.size());
        hi_.resize(records_ * dims_.size());
        node_.resize(records_ * dims_.size(), 0);
        for (std::size_t i = 0; i < records_; ++i) {
            for (std::size_t q = 0; q < dims_.size(); ++q) {
                const auto& cell = d.records[i].values[dims_[q].column];
                const std::size_t at = i * dims_.size() + q;
                if (dims_[q].numeric) {
                    auto b = numeric_bounds(cell);
                    if (!b) throw Error("non-numeric cell in quasi-identifier '" +
                                        d.schema->attributes[dims_[q].column].name + "'");
                    lo_[at] = b->lo;
                    hi_[at] = b->hi;
                } else {
                    node_[at] = dims_[q].taxonomy->id_of(render_cell(cell));
                }
            }
        }
    }

    std::size_t size() const { return records_; }
    std::size_t dims() const { return dims_.size(); }
    const Dim& dim(std::size_t q) const { return dims_[q]; }
    double lo(std::size_t i, std::size_t q) const { return lo_[i * dims_.size() + q]; }
    double hi(std::size_t i, std::size_t q) const { return hi_[i * dims_.size() + q]; }
    Taxonomy::NodeId node(std::size_t i, std::size_t q) const { return node_[i * dims_.size() + q]; }

    double numeric_ncp(std::size_t q, double lo, double hi) const {
        const auto& dom = dims_[q].domain;
        if (!(dom.min < dom.max)) return 0.0;
        return (hi - lo) / dom.width();
    }

private:
    std::size_t records_;
    std::vector<Dim> dims_;
    std::vector<double> lo_, hi_;
    std::vector<Taxonomy::NodeId> node_;
};

class GroupSpan {
public:
    explicit GroupSpan(const QiSpace& space) : space_(&space), lo_(space.dims()), hi_(space.dims()), node_(space.dims()) {}

    GroupSpan(const QiSpace& space, std::size_t first) : GroupSpan(space) { add(first); }

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    void add(std::size_t i) {
        for (std::size_t q = 0; q < space_->dims(); ++q) {
            if (space_->dim(q).numeric) {
                lo_[q] = size_ ? std::min(lo_[q], space_->lo(i, q)) : space_->lo(i, q);
                hi_[q] = size_ ? std::max(hi_[q], space_->hi(i, q)) : space_->hi(i, q);
            } else {
                node_[q] = size_ ? space_->dim(q).taxonomy->lca(node_[q], space_->node(i, q)) : space_->node(i, q);
            }
        }
        ++size_;
    }

    double ncp() const {
        if (size_ == 0 || space_->dims() == 0) return 0.0;
        double sum = 0.0;
        for (std::size_t q = 0; q < space_->dims(); ++q) sum += dim_ncp(q, lo_[q], hi_[q], node_[q]);
        return sum / static_cast<double>(space_->dims());
    }

    /// NCP the group would have after adding record i.
    double ncp_with(std::size_t i) const {
        if (space_->dims() == 0) return 0.0;
        if (size_ == 0) return single_ncp(i);
        double sum = 0.0;
        for (std::size_t q = 0; q < space_->dims(); ++q) {
            if (space_->dim(q).numeric) {
                sum += space_->numeric_ncp(q, std::min(lo_[q], space_->lo(i, q)), std::max(hi_[q], space_->hi(i, q)));
            } else {
                const auto* t = space_->dim(q).taxonomy;
                sum += ncp_categorical_node(*t, t->lca(node_[q], space_->node(i, q)));
            }
        }
        return sum / static_cast<double>(space_->dims());
    }

    /// NCP of the two-record group {a, b}.
    static double pair_ncp(const QiSpace& space, std::size_t a, std::size_t b) { return GroupSpan(space, a).ncp_with(b); }

private:
    double dim_ncp(std::size_t q, double lo, double hi, Taxonomy::NodeId node) const {
        if (space_->dim(q).numeric) return space_->numeric_ncp(q, lo, hi);
        return ncp_categorical_node(*space_->dim(q).taxonomy, node);
    }

    double single_ncp(std::size_t i) const {
        double sum = 0.0;
        for (std::size_t q = 0; q < space_->dims(); ++q)
            sum += dim_ncp(q, space_->lo(i, q), space_->hi(i, q), space_->node(i, q));
        return sum / static_cast<double>(space_->dims());
    }

    const QiSpace* space_;
    std::size_t size_ = 0;
    std::vector<double> lo_, hi_;
    std::vector<Taxonomy::NodeId> node_;
};

} // namespace kanon
