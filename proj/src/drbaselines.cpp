/*
 * Copyright 2026 The RISE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rise/drbaselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "rise/parallel.hpp"

namespace rise {

// ---- Propensity ------------------------------------------------------------

Propensity Propensity::Known(double p_plus) {
  if (!(p_plus > 0.0 && p_plus < 1.0)) {
    throw ConfigError("known propensity must lie in (0, 1)");
  }
  Propensity p;
  p.constant_ = p_plus;
  return p;
}

Propensity Propensity::Fitted(Predictor clf, bool use_s, SensitiveEncoder enc) {
  Propensity p;
  p.clf_ = std::move(clf);
  p.use_s_ = use_s;
  p.encoder_ = std::move(enc);
  return p;
}

namespace {

double Clip(double p) {
  return std::clamp(p, kPropensityClip, 1.0 - kPropensityClip);
}

RowMatrix JoinSensitive(const RowMatrix& x, const RowMatrix& s,
                        const SensitiveEncoder& enc) {
  const Index p = x.cols();
  RowMatrix in(x.rows(), p + enc.width());
  in.leftCols(p) = x;
  for (Index i = 0; i < x.rows(); ++i) {
    enc.Encode(RowSpan(s, i), {in.data() + i * in.cols() + p,
                               static_cast<size_t>(enc.width())});
  }
  return in;
}

}  // namespace

double Propensity::Plus(std::span<const double> x,
                        std::span<const double> s) const {
  if (!clf_) return constant_;
  if (!use_s_) return Clip(Expit(clf_->Predict(x)));
  std::vector<double> in(x.begin(), x.end());
  in.resize(x.size() + encoder_.width());
  encoder_.Encode(s, {in.data() + x.size(), static_cast<size_t>(encoder_.width())});
  return Clip(Expit(clf_->Predict(in)));
}

Vector Propensity::PlusBatch(const RowMatrix& x, const RowMatrix& s) const {
  if (!clf_) return Vector::Constant(x.rows(), constant_);
  const Vector logit =
      clf_->PredictBatch(use_s_ ? JoinSensitive(x, s, encoder_) : x);
  return logit.unaryExpr([](double z) { return Clip(Expit(z)); });
}

nlohmann::json Propensity::ToJson() const {
  if (!clf_) return {{"source", "known"}, {"p_plus", constant_}};
  return {{"source", "fitted"},
          {"use_s", use_s_},
          {"clip", kPropensityClip},
          {"model", clf_->ToJson()}};
}

Propensity FitPropensity(const Dataset& train, bool use_s,
                         const LearnerConfig& cfg) {
  const Index treated = train.CountAction(Action::kPlus);
  if (treated == 0 || treated == train.size()) {
    throw FitError("propensity fit needs both actions in the data");
  }
  if (use_s && train.num_sensitive() == 0) {
    throw ConfigError("propensity with s requested but data has no s");
  }
  const SensitiveEncoder enc =
      use_s ? SensitiveEncoder::Fit(train) : SensitiveEncoder();
  const RowMatrix in = use_s ? JoinSensitive(train.x(), train.s(), enc)
                             : train.x();
  Vector labels(train.size());
  for (Index i = 0; i < train.size(); ++i) labels[i] = ToSign(train.a()[i]);
  LearnerConfig seeded = cfg;
  seeded.seed = Rng(cfg.seed).Stream("propensity").Next();
  Predictor clf = FitWeightedClassifier(in, labels,
                                        Vector::Ones(train.size()), seeded);
  return Propensity::Fitted(std::move(clf), use_s, enc);
}

// ---- AIPW ------------------------------------------------------------------

ScoreTable AipwScores(const Dataset& train, const OutcomeModel& om,
                      const Propensity& prop, int threads) {
  const Vector p_plus = prop.PlusBatch(train.x(), train.s());
  ScoreTable t;
  for (Action arm : kBothActions) {
    const Vector mu = om.PredictBatch(train.x(), train.s(), arm, threads);
    Vector gamma(train.size());
    for (Index i = 0; i < train.size(); ++i) {
      const double p = IsTreated(arm) ? p_plus[i] : 1.0 - p_plus[i];
      if (!(p > 0.0 && p < 1.0)) {
        throw Error("propensity " + std::to_string(p) + " outside (0, 1) at row " +
                    std::to_string(i));
      }
      gamma[i] = mu[i];
      if (train.a()[i] == arm) gamma[i] += (train.y()[i] - mu[i]) / p;
      if (!std::isfinite(gamma[i])) {
        throw FitError("non-finite AIPW score at row " + std::to_string(i));
      }
    }
    (IsTreated(arm) ? t.gamma_plus : t.gamma_minus) = std::move(gamma);
  }
  return t;
}

// ---- TreePolicy ------------------------------------------------------------

TreePolicy::TreePolicy(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ConfigError("tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.feature < 0) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
      throw ConfigError("tree child index out of range");
    }
  }
}

TreePolicy TreePolicy::Leaf(Action a) {
  TreeNode leaf;
  leaf.action = a;
  return TreePolicy({leaf});
}

TreePolicy TreePolicy::Stump(int feature, double threshold, Action left,
                             Action right) {
  TreeNode root{feature, threshold, Action::kMinus, 1, 2};
  TreeNode l;
  l.action = left;
  TreeNode r;
  r.action = right;
  return TreePolicy({root, l, r});
}

Action TreePolicy::Decide(std::span<const double> x) const {
  int k = 0;
  while (nodes_[k].feature >= 0) {
    const TreeNode& node = nodes_[k];
    k = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes_[k].action;
}

int TreePolicy::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  for (size_t k = 0; k < nodes_.size(); ++k) {
    if (nodes_[k].feature < 0) {
      best = std::max(best, d[k]);
      continue;
    }
    d[nodes_[k].left] = d[k] + 1;
    d[nodes_[k].right] = d[k] + 1;
  }
  return best;
}

nlohmann::json TreePolicy::ToJson() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& node : nodes_) {
    if (node.feature < 0) {
      arr.push_back({{"action", static_cast<int>(node.action)}});
    } else {
      arr.push_back({{"feature", node.feature},
                     {"threshold", node.threshold},
                     {"left", node.left},
                     {"right", node.right}});
    }
  }
  return arr;
}

nlohmann::json TreeScore::ToJson() const {
  return {{"type", "policy_tree"}, {"nodes", tree_.ToJson()}};
}

double TreeObjective(const TreePolicy& tree, const RowMatrix& x,
                     const ScoreTable& scores) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    total += scores.gamma(i, tree.Decide(RowSpan(x, i)));
  }
  return total;
}

// ---- Tree search -----------------------------------------------------------
//
// Everything is expressed as the gain over assigning -1 everywhere:
// delta_i = gamma_plus(i) - gamma_minus(i). A child subtree on a node set with
// total delta T has gain 0 (leaf -1), T (leaf +1), T - F(c) (split at cut c,
// left -1 / right +1) or F(c) (left +1 / right -1), where F(c) sums delta over
// the node's rows whose feature rank is <= c.

namespace {

struct FeatureCuts {
  std::vector<double> values;  // sorted distinct values
  std::vector<int> rank;       // per row, index into values

  int num_cuts() const { return static_cast<int>(values.size()) - 1; }
  double Threshold(int c) const {
    const double lo = values[c];
    const double hi = values[c + 1];
    const double mid = lo + 0.5 * (hi - lo);
    return mid < hi ? mid : lo;
  }
};

std::vector<FeatureCuts> BuildCuts(const RowMatrix& x) {
  std::vector<FeatureCuts> cuts(x.cols());
  for (Index k = 0; k < x.cols(); ++k) {
    auto& fc = cuts[k];
    fc.values.reserve(x.rows());
    for (Index i = 0; i < x.rows(); ++i) fc.values.push_back(x(i, k));
    std::sort(fc.values.begin(), fc.values.end());
    fc.values.erase(std::unique(fc.values.begin(), fc.values.end()),
                    fc.values.end());
    fc.rank.resize(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
      fc.rank[i] = static_cast<int>(
          std::lower_bound(fc.values.begin(), fc.values.end(), x(i, k)) -
          fc.values.begin());
    }
  }
  return cuts;
}

struct ChildChoice {
  double gain = 0.0;
  int feature = -1;  // -1: leaf with action `left`
  int cut = -1;
  Action left = Action::kMinus;
  Action right = Action::kPlus;
};

// Leaves in canonical order.
ChildChoice BestLeaf(double total) {
  ChildChoice best;
  if (total > best.gain) {
    best.gain = total;
    best.left = Action::kPlus;
  }
  return best;
}

// Offers the two split orientations of feature k, in canonical order, to best.
// (min_f, min_c) is the leftmost minimum of F, (max_f, max_c) the leftmost
// maximum.
void OfferSplits(int k, double total, double min_f, int min_c, double max_f,
                 int max_c, ChildChoice& best) {
  ChildChoice minus_plus{total - min_f, k, min_c, Action::kMinus, Action::kPlus};
  ChildChoice plus_minus{max_f, k, max_c, Action::kPlus, Action::kMinus};
  const bool minus_plus_first = min_c <= max_c;
  const ChildChoice& first = minus_plus_first ? minus_plus : plus_minus;
  const ChildChoice& second = minus_plus_first ? plus_minus : minus_plus;
  if (first.gain > best.gain) best = first;
  if (second.gain > best.gain) best = second;
}

// Range-add over cut positions with leftmost max / min queries.
class CutTree {
 public:
  explicit CutTree(int size) : size_(size) {
    int cap = 1;
    while (cap < size) cap <<= 1;
    max_.assign(2 * cap, 0.0);
    min_.assign(2 * cap, 0.0);
    lazy_.assign(2 * cap, 0.0);
    max_at_.assign(2 * cap, 0);
    min_at_.assign(2 * cap, 0);
    Build(1, 0, size_ - 1);
  }

  void Reset() {
    std::fill(max_.begin(), max_.end(), 0.0);
    std::fill(min_.begin(), min_.end(), 0.0);
    std::fill(lazy_.begin(), lazy_.end(), 0.0);
    Build(1, 0, size_ - 1);
  }

  // Adds v at positions [from, size).
  void AddSuffix(int from, double v) {
    if (from >= size_) return;
    Add(1, 0, size_ - 1, from, v);
  }

  double max() const { return max_[1]; }
  int max_at() const { return max_at_[1]; }
  double min() const { return min_[1]; }
  int min_at() const { return min_at_[1]; }

 private:
  void Build(int node, int lo, int hi) {
    if (lo == hi) {
      max_at_[node] = min_at_[node] = lo;
      return;
    }
    const int mid = (lo + hi) / 2;
    Build(2 * node, lo, mid);
    Build(2 * node + 1, mid + 1, hi);
    Pull(node);
  }

  void Pull(int node) {
    const int l = 2 * node;
    const int r = l + 1;
    if (max_[l] >= max_[r]) {
      max_[node] = max_[l] + lazy_[node];
      max_at_[node] = max_at_[l];
    } else {
      max_[node] = max_[r] + lazy_[node];
      max_at_[node] = max_at_[r];
    }
    if (min_[l] <= min_[r]) {
      min_[node] = min_[l] + lazy_[node];
      min_at_[node] = min_at_[l];
    } else {
      min_[node] = min_[r] + lazy_[node];
      min_at_[node] = min_at_[r];
    }
  }

  void Add(int node, int lo, int hi, int from, double v) {
    if (from <= lo) {
      max_[node] += v;
      min_[node] += v;
      lazy_[node] += v;
      return;
    }
    const int mid = (lo + hi) / 2;
    if (from <= mid) Add(2 * node, lo, mid, from, v);
    Add(2 * node + 1, mid + 1, hi, from, v);
    Pull(node);
  }

  int size_;
  std::vector<double> max_, min_, lazy_;
  std::vector<int> max_at_, min_at_;
};

struct RootChoice {
  double gain = 0.0;
  int feature = -1;  // -1: leaf, action in left.left
  int cut = -1;
  ChildChoice left;
  ChildChoice right;
};

Vector Deltas(const ScoreTable& scores) {
  return scores.gamma_plus - scores.gamma_minus;
}

void CheckTreeArgs(const RowMatrix& x, const ScoreTable& scores, int depth) {
  if (depth < 1) throw ConfigError("tree depth must be at least 1");
  if (depth > 2) throw ConfigError("tree depth above 2 is not supported");
  if (x.rows() < 2) throw FitError("tree search needs at least two rows");
  if (x.cols() < 1) throw FitError("tree search needs at least one feature");
  if (scores.gamma_plus.size() != x.rows() ||
      scores.gamma_minus.size() != x.rows()) {
    throw FitError("score table does not match the rows of x");
  }
  if (!scores.gamma_plus.allFinite() || !scores.gamma_minus.allFinite()) {
    throw FitError("score table has non-finite entries");
  }
}

RootChoice BestConstant(const Vector& delta) {
  RootChoice root;
  root.left = BestLeaf(delta.sum());
  root.gain = root.left.gain;
  return root;
}

TreeNode LeafNode(Action a) {
  TreeNode node;
  node.action = a;
  return node;
}

// Appends the subtree for a child choice; returns its node index.
int Emit(const ChildChoice& c, const std::vector<FeatureCuts>& cuts,
         std::vector<TreeNode>& nodes) {
  if (c.feature < 0) {
    nodes.push_back(LeafNode(c.left));
    return static_cast<int>(nodes.size()) - 1;
  }
  const int at = static_cast<int>(nodes.size());
  nodes.push_back({c.feature, cuts[c.feature].Threshold(c.cut), Action::kMinus,
                   at + 1, at + 2});
  nodes.push_back(LeafNode(c.left));
  nodes.push_back(LeafNode(c.right));
  return at;
}

TreePolicy ToTree(const RootChoice& root,
                  const std::vector<FeatureCuts>& cuts) {
  if (root.feature < 0) return TreePolicy::Leaf(root.left.left);
  std::vector<TreeNode> nodes(1);
  nodes[0].feature = root.feature;
  nodes[0].threshold = cuts[root.feature].Threshold(root.cut);
  nodes[0].left = Emit(root.left, cuts, nodes);
  nodes[0].right = Emit(root.right, cuts, nodes);
  return TreePolicy(std::move(nodes));
}

// Best root split on feature j by a forward and a backward sweep.
RootChoice SweepRootFeature(int j, const RowMatrix& x, const Vector& delta,
                            const std::vector<FeatureCuts>& cuts, int depth) {
  RootChoice best;
  best.gain = -std::numeric_limits<double>::infinity();
  const FeatureCuts& fj = cuts[j];
  const int root_cuts = fj.num_cuts();
  if (root_cuts <= 0) return best;
  const Index n = x.rows();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return fj.rank[a] < fj.rank[b];
  });

  std::vector<std::unique_ptr<CutTree>> trees(x.cols());
  if (depth == 2) {
    for (Index k = 0; k < x.cols(); ++k) {
      if (cuts[k].num_cuts() > 0) {
        trees[k] = std::make_unique<CutTree>(cuts[k].num_cuts());
      }
    }
  }
  auto best_child = [&](double total) {
    ChildChoice c = BestLeaf(total);
    if (depth < 2) return c;
    for (Index k = 0; k < x.cols(); ++k) {
      if (!trees[k]) continue;
      OfferSplits(static_cast<int>(k), total, trees[k]->min(),
                  trees[k]->min_at(), trees[k]->max(), trees[k]->max_at(), c);
    }
    return c;
  };
  auto insert = [&](Index i) {
    if (depth < 2) return;
    for (Index k = 0; k < x.cols(); ++k) {
      if (trees[k]) trees[k]->AddSuffix(cuts[k].rank[i], delta[i]);
    }
  };

  // Forward: left child after each complete group of equal x_j.
  std::vector<ChildChoice> left(root_cuts);
  double total = 0.0;
  Index pos = 0;
  for (int c = 0; c < root_cuts; ++c) {
    while (pos < n && fj.rank[order[pos]] <= c) {
      insert(order[pos]);
      total += delta[order[pos]];
      ++pos;
    }
    left[c] = best_child(total);
  }
  // Backward: right child.
  for (auto& t : trees) {
    if (t) t->Reset();
  }
  std::vector<ChildChoice> right(root_cuts);
  total = 0.0;
  pos = n - 1;
  for (int c = root_cuts - 1; c >= 0; --c) {
    while (pos >= 0 && fj.rank[order[pos]] > c) {
      insert(order[pos]);
      total += delta[order[pos]];
      --pos;
    }
    right[c] = best_child(total);
  }
  for (int c = 0; c < root_cuts; ++c) {
    const double gain = left[c].gain + right[c].gain;
    if (gain > best.gain) {
      best = {gain, j, c, left[c], right[c]};
    }
  }
  return best;
}

// Direct version of the child search: F from per-rank bucket sums.
ChildChoice BestChildDirect(const std::vector<Index>& rows,
                            const Vector& delta,
                            const std::vector<FeatureCuts>& cuts, int depth) {
  double total = 0.0;
  for (Index i : rows) total += delta[i];
  ChildChoice best = BestLeaf(total);
  if (depth < 2) return best;
  for (size_t k = 0; k < cuts.size(); ++k) {
    const int num_cuts = cuts[k].num_cuts();
    if (num_cuts <= 0) continue;
    std::vector<double> bucket(cuts[k].values.size(), 0.0);
    for (Index i : rows) bucket[cuts[k].rank[i]] += delta[i];
    double f = 0.0;
    for (int c = 0; c < num_cuts; ++c) {
      f += bucket[c];
      const ChildChoice minus_plus{total - f, static_cast<int>(k), c,
                                   Action::kMinus, Action::kPlus};
      const ChildChoice plus_minus{f, static_cast<int>(k), c, Action::kPlus,
                                   Action::kMinus};
      if (minus_plus.gain > best.gain) best = minus_plus;
      if (plus_minus.gain > best.gain) best = plus_minus;
    }
  }
  return best;
}

}  // namespace

TreePolicy FitPolicyTree(const RowMatrix& x, const ScoreTable& scores,
                         int depth, int threads) {
  CheckTreeArgs(x, scores, depth);
  const Vector delta = Deltas(scores);
  const auto cuts = BuildCuts(x);
  std::vector<RootChoice> per_feature(x.cols());
  parallel::For(x.cols(), threads, [&](int64_t j) {
    per_feature[j] =
        SweepRootFeature(static_cast<int>(j), x, delta, cuts, depth);
  });
  RootChoice best = BestConstant(delta);
  for (const auto& r : per_feature) {
    if (r.feature >= 0 && r.gain > best.gain) best = r;
  }
  return ToTree(best, cuts);
}

TreePolicy FitPolicyTreeReference(const RowMatrix& x, const ScoreTable& scores,
                                  int depth) {
  CheckTreeArgs(x, scores, depth);
  const Vector delta = Deltas(scores);
  const auto cuts = BuildCuts(x);
  RootChoice best = BestConstant(delta);
  for (Index j = 0; j < x.cols(); ++j) {
    for (int c = 0; c < cuts[j].num_cuts(); ++c) {
      std::vector<Index> left_rows, right_rows;
      for (Index i = 0; i < x.rows(); ++i) {
        (cuts[j].rank[i] <= c ? left_rows : right_rows).push_back(i);
      }
      const ChildChoice l = BestChildDirect(left_rows, delta, cuts, depth);
      const ChildChoice r = BestChildDirect(right_rows, delta, cuts, depth);
      if (l.gain + r.gain > best.gain) {
        best = {l.gain + r.gain, static_cast<int>(j), c, l, r};
      }
    }
  }
  return ToTree(best, cuts);
}

Policy FitPolicyTreeWith(const Dataset& train, const OutcomeModel& om,
                         const Propensity& prop, int depth, uint64_t tie_seed,
                         int threads) {
  const ScoreTable scores = AipwScores(train, om, prop, threads);
  TreePolicy tree = FitPolicyTree(train.x(), scores, depth, threads);
  nlohmann::json prov;
  prov["depth"] = depth;
  prov["propensity"] = prop.ToJson();
  prov["objective"] = TreeObjective(tree, train.x(), scores);
  return Policy(std::make_shared<TreeScore>(std::move(tree)),
                om.use_s() ? MethodTag::kPtExp : MethodTag::kPtBase, tie_seed,
                std::move(prov));
}

}  // namespace rise
