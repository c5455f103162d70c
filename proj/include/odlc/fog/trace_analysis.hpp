#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odlc/core/record.hpp"

namespace odlc::fog {

struct SpanNode {
  TraceSpan span;
  bool orphan = false;          // parent id set but not present in the trace
  std::vector<std::size_t> children;  // indices into SpanTree::nodes
};

// Children are ordered by (start, span_id). When orphans exist, a synthetic
// root (synthetic = true) collects them together with any real roots.
struct SpanTree {
  TraceId trace_id;
  std::vector<SpanNode> nodes;
  std::vector<std::size_t> roots;
  bool synthetic_root = false;
  std::size_t orphan_count = 0;

  std::size_t depth() const;
};

// Throws TraceNotFound on an empty span list.
SpanTree assemble_trace(const TraceId& id, std::vector<TraceSpan> spans);

// duration minus the measure of the union of child intervals clipped to the
// span, floored at zero.
std::int64_t self_time(const TraceSpan& span, const std::vector<const TraceSpan*>& children);

// Root-to-leaf path maximizing the sum of self-times across all roots. Ties
// prefer the earliest-starting child, then the smallest span id.
std::vector<TraceSpan> critical_path(const SpanTree& tree);

struct DependencyEdge {
  std::string from;
  std::string to;
  std::uint64_t count = 0;
  double mean_duration_us = 0.0;  // mean child duration
};

struct DependencyGraph {
  std::vector<std::string> nodes;     // sorted
  std::vector<DependencyEdge> edges;  // sorted by (from, to)
};

// One edge per observed parent.service -> child.service pair; spans whose
// parent is not in the input are ignored.
DependencyGraph dependency_graph(const std::vector<TraceSpan>& spans);

}  // namespace odlc::fog
