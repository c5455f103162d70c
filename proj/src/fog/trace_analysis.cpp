#include "odlc/fog/trace_analysis.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "odlc/core/errors.hpp"

namespace odlc::fog {

namespace {

bool earlier(const TraceSpan& a, const TraceSpan& b) {
  return a.start != b.start ? a.start < b.start : a.span_id < b.span_id;
}

}  // namespace

std::size_t SpanTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (auto r : roots) stack.emplace_back(r, 1);
  while (!stack.empty()) {
    auto [n, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    for (auto c : nodes[n].children) stack.emplace_back(c, d + 1);
  }
  return best;
}

SpanTree assemble_trace(const TraceId& id, std::vector<TraceSpan> spans) {
  if (spans.empty()) throw TraceNotFound("trace " + id.hex() + " not found");
  std::sort(spans.begin(), spans.end(), earlier);
  SpanTree tree;
  tree.trace_id = id;
  std::unordered_map<std::uint64_t, std::size_t> by_id;
  for (auto& s : spans) {
    if (by_id.contains(s.span_id)) continue;
    by_id.emplace(s.span_id, tree.nodes.size());
    tree.nodes.push_back(SpanNode{std::move(s), false, {}});
  }
  std::vector<std::optional<std::size_t>> parent(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& p = tree.nodes[i].span.parent_span_id;
    if (!p) continue;
    if (auto it = by_id.find(*p); it != by_id.end()) {
      parent[i] = it->second;
    } else {
      tree.nodes[i].orphan = true;
    }
  }
  // Parent links that never reach a root form cycles; cut them at their
  // earliest span and treat that span as an orphan.
  std::vector<int> state(tree.nodes.size(), 0);  // 0 unknown, 1 on path, 2 reaches a root
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    std::vector<std::size_t> path;
    std::size_t cur = i;
    while (state[cur] == 0 && parent[cur]) {
      state[cur] = 1;
      path.push_back(cur);
      cur = *parent[cur];
    }
    if (state[cur] == 1) {
      std::size_t cut = cur;
      for (std::size_t n = *parent[cur]; n != cur; n = *parent[n]) {
        if (earlier(tree.nodes[n].span, tree.nodes[cut].span)) cut = n;
      }
      parent[cut].reset();
      tree.nodes[cut].orphan = true;
    }
    state[cur] = 2;
    for (auto n : path) state[n] = 2;
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    if (parent[i]) {
      tree.nodes[*parent[i]].children.push_back(i);
    } else {
      tree.roots.push_back(i);
      if (tree.nodes[i].orphan) ++tree.orphan_count;
    }
  }
  tree.synthetic_root = tree.orphan_count > 0;
  return tree;
}

std::int64_t self_time(const TraceSpan& span, const std::vector<const TraceSpan*>& children) {
  std::vector<std::pair<std::int64_t, std::int64_t>> iv;
  for (const auto* c : children) {
    const auto b = std::max(span.start, c->start);
    const auto e = std::min(span.end(), c->end());
    if (e > b) iv.emplace_back(b, e);
  }
  std::sort(iv.begin(), iv.end());
  std::int64_t covered = 0, cur_b = 0, cur_e = 0;
  bool open = false;
  for (auto [b, e] : iv) {
    if (!open || b > cur_e) {
      if (open) covered += cur_e - cur_b;
      cur_b = b;
      cur_e = e;
      open = true;
    } else {
      cur_e = std::max(cur_e, e);
    }
  }
  if (open) covered += cur_e - cur_b;
  return std::max<std::int64_t>(0, span.duration - covered);
}

std::vector<TraceSpan> critical_path(const SpanTree& tree) {
  const std::size_t n = tree.nodes.size();
  std::vector<std::int64_t> best(n, 0);
  std::vector<std::optional<std::size_t>> next(n);
  // Reverse pre-order visits every child before its parent.
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> stack(tree.roots.rbegin(), tree.roots.rend());
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (auto c : tree.nodes[v].children) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto v = *it;
    const auto& node = tree.nodes[v];
    std::vector<const TraceSpan*> kids;
    for (auto c : node.children) kids.push_back(&tree.nodes[c].span);
    std::int64_t sub = 0;
    for (auto c : node.children) {
      if (!next[v] || best[c] > sub || (best[c] == sub && earlier(tree.nodes[c].span, tree.nodes[*next[v]].span))) {
        sub = best[c];
        next[v] = c;
      }
    }
    best[v] = self_time(node.span, kids) + sub;
  }
  std::optional<std::size_t> start;
  for (auto r : tree.roots) {
    if (!start || best[r] > best[*start] ||
        (best[r] == best[*start] && earlier(tree.nodes[r].span, tree.nodes[*start].span)))
      start = r;
  }
  std::vector<TraceSpan> path;
  for (auto v = start; v; v = next[*v]) path.push_back(tree.nodes[*v].span);
  return path;
}

DependencyGraph dependency_graph(const std::vector<TraceSpan>& spans) {
  std::map<std::pair<TraceId, std::uint64_t>, const TraceSpan*> index;
  for (const auto& s : spans) index.emplace(std::make_pair(s.trace_id, s.span_id), &s);
  struct Acc {
    std::uint64_t count = 0;
    double total = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  std::set<std::string> nodes;
  for (const auto& [key, s] : index) {
    nodes.insert(s->service);
    if (!s->parent_span_id) continue;
    auto it = index.find({s->trace_id, *s->parent_span_id});
    if (it == index.end()) continue;
    auto& a = acc[{it->second->service, s->service}];
    ++a.count;
    a.total += static_cast<double>(s->duration);
  }
  DependencyGraph g;
  g.nodes.assign(nodes.begin(), nodes.end());
  for (const auto& [k, a] : acc) {
    g.edges.push_back(DependencyEdge{k.first, k.second, a.count, a.total / static_cast<double>(a.count)});
  }
  return g;
}

}  // namespace odlc::fog
