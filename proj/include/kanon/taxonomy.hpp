#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kanon/csv.hpp"
#include "kanon/error.hpp"

namespace kanon {

/// Value-generalization hierarchy for one categorical attribute.
///
/// Nodes are stored flat; node 0 is the root. Leaves keep the order in which
/// they first appear in the hierarchy file, which is the total order used by
/// median splits.
class Taxonomy {
public:
    using NodeId = std::size_t;
    static constexpr NodeId npos = static_cast<NodeId>(-1);

    struct Node {
        std::string label;
        NodeId parent = npos;
        std::size_t depth = 0; // root is 0
        std::vector<NodeId> children;
        std::size_t leaf_count = 0;
        std::size_t first_leaf = 0; // smallest leaf index in the subtree
    };

    Taxonomy() = default;

    const std::string& attribute_name() const { return attribute_; }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    NodeId root() const { return 0; }
    std::size_t node_count() const { return nodes_.size(); }
    /// Number of levels from leaf to root inclusive.
    std::size_t depth() const { return levels_; }
    std::size_t leaf_total() const { return leaves_.size(); }
    const std::vector<NodeId>& leaves() const { return leaves_; }

    bool contains(std::string_view label) const { return by_label_.contains(std::string(label)); }

    std::optional<NodeId> find(std::string_view label) const {
        auto it = by_label_.find(std::string(label));
        if (it == by_label_.end()) return std::nullopt;
        return it->second;
    }

    NodeId id_of(std::string_view label) const {
        auto id = find(label);
        if (!id) throw SchemaError("taxonomy '" + attribute_ + "': unknown label '" + std::string(label) + "'");
        return *id;
    }

    bool is_leaf(NodeId id) const { return nodes_.at(id).children.empty(); }

    /// Lowest common ancestor-or-self of two nodes.
    NodeId lca(NodeId a, NodeId b) const {
        while (nodes_[a].depth > nodes_[b].depth) a = nodes_[a].parent;
        while (nodes_[b].depth > nodes_[a].depth) b = nodes_[b].parent;
        while (a != b) {
            a = nodes_[a].parent;
            b = nodes_[b].parent;
        }
        return a;
    }

    bool is_ancestor_or_self(NodeId ancestor, NodeId node) const {
        while (node != npos) {
            if (node == ancestor) return true;
            node = nodes_[node].parent;
        }
        return false;
    }

    /// 0-based position of a leaf in file order.
    std::size_t leaf_index(std::string_view label) const {
        const NodeId id = id_of(label);
        if (!is_leaf(id))
            throw SchemaError("taxonomy '" + attribute_ + "': '" + std::string(label) + "' is not a leaf");
        return leaf_position_.at(id);
    }

    std::size_t leaf_index(NodeId id) const { return leaf_position_.at(id); }

    std::size_t subtree_leaf_count(std::string_view label) const { return nodes_[id_of(label)].leaf_count; }

    /// Labels grouped by distance from the leaves: level 0 holds the leaves,
    /// the last level holds the root. Order within a level follows leaf order.
    std::vector<std::vector<std::string>> levels() const {
        std::vector<std::vector<std::string>> out(levels_);
        std::vector<bool> seen(nodes_.size(), false);
        for (NodeId leaf : leaves_) {
            NodeId cur = leaf;
            std::size_t level = 0;
            while (cur != npos) {
                if (!seen[cur]) {
                    seen[cur] = true;
                    out[level].push_back(nodes_[cur].label);
                }
                cur = nodes_[cur].parent;
                ++level;
            }
        }
        return out;
    }

    friend Taxonomy load_hierarchy(std::string_view csv_text, std::string attribute_name);

private:
    std::string attribute_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, NodeId> by_label_;
    std::vector<NodeId> leaves_;
    std::unordered_map<NodeId, std::size_t> leaf_position_;
    std::size_t levels_ = 0;
};

namespace detail {

inline std::vector<std::string> split_path(std::string_view line) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(';', start);
        std::string_view part = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!part.empty() && (part.front() == ' ' || part.front() == '\t')) part.remove_prefix(1);
        while (!part.empty() && (part.back() == ' ' || part.back() == '\t' || part.back() == '\r')) part.remove_suffix(1);
        parts.emplace_back(part);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

} // namespace detail

/// Builds a taxonomy from leaf-to-root rows of the form "leaf;level1;...;root".
inline Taxonomy load_hierarchy(std::string_view csv_text, std::string attribute_name) {
    Taxonomy t;
    t.attribute_ = std::move(attribute_name);
    const std::string prefix = "hierarchy '" + t.attribute_ + "': ";

    std::vector<std::vector<std::string>> paths;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= csv_text.size()) {
        const auto nl = csv_text.find('\n', start);
        std::string_view line = csv_text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        ++line_no;
        start = nl == std::string_view::npos ? csv_text.size() + 1 : nl + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        auto path = detail::split_path(line);
        for (const auto& p : path)
            if (p.empty()) throw ParseError(prefix + "empty label on line " + std::to_string(line_no));
        if (!paths.empty() && path.size() != paths.front().size())
            throw ParseError(prefix + "ragged depth on line " + std::to_string(line_no) + " (" +
                             std::to_string(path.size()) + " levels, expected " +
                             std::to_string(paths.front().size()) + ")");
        paths.push_back(std::move(path));
    }
    if (paths.empty()) throw ParseError(prefix + "empty file");

    const std::size_t levels = paths.front().size();
    const std::string& root_label = paths.front().back();
    t.levels_ = levels;
    t.nodes_.push_back({root_label, Taxonomy::npos, 0, {}, 0, 0});
    t.by_label_[root_label] = 0;

    for (std::size_t r = 0; r < paths.size(); ++r) {
        const auto& path = paths[r];
        if (path.back() != root_label)
            throw ParseError(prefix + "row " + std::to_string(r + 1) + " has root '" + path.back() + "', expected '" +
                             root_label + "'");
        // Walk from the root down towards the leaf, creating nodes as needed.
        Taxonomy::NodeId parent = 0;
        for (std::size_t level = levels - 1; level-- > 0;) {
            const std::string& label = path[level];
            const std::size_t depth = levels - 1 - level;
            auto it = t.by_label_.find(label);
            if (it != t.by_label_.end()) {
                const auto& existing = t.nodes_[it->second];
                if (existing.parent != parent || existing.depth != depth) {
                    if (level == 0)
                        throw ParseError(prefix + "leaf '" + label + "' listed with conflicting paths");
                    throw ParseError(prefix + "label '" + label + "' appears at two places in the tree");
                }
                if (level == 0) continue; // duplicate of an identical row
                parent = it->second;
                continue;
            }
            const Taxonomy::NodeId id = t.nodes_.size();
            t.nodes_.push_back({label, parent, depth, {}, 0, 0});
            t.nodes_[parent].children.push_back(id);
            t.by_label_[label] = id;
            if (level == 0) {
                t.leaf_position_[id] = t.leaves_.size();
                t.leaves_.push_back(id);
            }
            parent = id;
        }
    }
    if (levels == 1) {
        // A lone root is its own leaf.
        t.leaf_position_[0] = 0;
        t.leaves_.push_back(0);
    }

    for (Taxonomy::NodeId leaf : t.leaves_) {
        const std::size_t pos = t.leaf_position_[leaf];
        for (auto cur = leaf; cur != Taxonomy::npos; cur = t.nodes_[cur].parent) {
            auto& n = t.nodes_[cur];
            if (n.leaf_count == 0) n.first_leaf = pos;
            n.first_leaf = std::min(n.first_leaf, pos);
            ++n.leaf_count;
        }
    }
    return t;
}

/// Label of the lowest node that is an ancestor-or-self of every input label.
template <class Range>
std::string lca(const Taxonomy& t, const Range& labels) {
    auto it = std::begin(labels);
    if (it == std::end(labels)) throw SchemaError("lca of an empty label set");
    Taxonomy::NodeId acc = t.id_of(*it);
    for (++it; it != std::end(labels); ++it) acc = t.lca(acc, t.id_of(*it));
    return t.node(acc).label;
}

inline std::string lca(const Taxonomy& t, std::initializer_list<std::string_view> labels) {
    return lca<std::initializer_list<std::string_view>>(t, labels);
}

inline std::size_t leaf_index(const Taxonomy& t, std::string_view leaf_label) { return t.leaf_index(leaf_label); }

inline std::size_t subtree_leaf_count(const Taxonomy& t, std::string_view label) {
    return t.subtree_leaf_count(label);
}

/// One taxonomy per categorical quasi-identifier, keyed by attribute name.
using TaxonomySet = std::map<std::string, Taxonomy, std::less<>>;

} // namespace kanon
