#include "spikedet/lever.hpp"

#include <algorithm>
#include <cmath>

#include "spikedet/errors.hpp"

namespace spikedet {

const char* recipe_name(Recipe r) {
  switch (r) {
    case Recipe::no_op: return "no_op";
    case Recipe::shadow: return "shadow";
    case Recipe::mf3: return "mf3";
    case Recipe::raw: return "raw";
    case Recipe::union_6ch: return "union_6ch";
    case Recipe::sky: return "sky";
  }
  return "?";
}

Recipe recipe_from_name(const std::string& name) {
  for (int i = 0; i <= 5; ++i) {
    auto r = static_cast<Recipe>(i);
    if (name == recipe_name(r)) return r;
  }
  throw UsageError("unknown recipe '" + name + "'");
}

std::vector<Recipe> pool_recipes(LeverPool pool) {
  std::vector<Recipe> v = {Recipe::no_op, Recipe::shadow, Recipe::mf3, Recipe::raw};
  if (pool == LeverPool::l6) {
    v.push_back(Recipe::union_6ch);
    v.push_back(Recipe::sky);
  }
  return v;
}

LeverMap build_lever_map(const std::vector<int>& cohort_of_sequence,
                         const std::vector<std::map<Recipe, double>>& metrics,
                         LeverPool pool) {
  if (cohort_of_sequence.size() != metrics.size())
    throw DataError("build_lever_map: cohort/metric length mismatch");
  const auto recipes = pool_recipes(pool);

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t s = 0; s < cohort_of_sequence.size(); ++s)
    members[cohort_of_sequence[s]].push_back(s);

  LeverMap map;
  for (const auto& [cohort, seqs] : members) {
    Recipe best = recipes.front();
    double best_mean = -std::numeric_limits<double>::infinity();
    for (Recipe r : recipes) {
      double sum = 0.0;
      for (std::size_t s : seqs) {
        auto it = metrics[s].find(r);
        if (it == metrics[s].end())
          throw DataError("build_lever_map: metric missing for a pool recipe");
        sum += it->second;
      }
      double m = sum / static_cast<double>(seqs.size());
      if (m > best_mean) {  // strict: ties keep the earlier pool entry
        best_mean = m;
        best = r;
      }
    }
    map.by_cohort[cohort] = best;
  }
  return map;
}

double supervision_bits(int active_cohorts, int pool_size) {
  if (active_cohorts < 0) throw DataError("supervision_bits: negative cohort count");
  if (pool_size < 2) throw DataError("supervision_bits: pool size must be >= 2");
  return static_cast<double>(active_cohorts) * std::log2(static_cast<double>(pool_size));
}

namespace {

// Median of up to three values.
double med3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

std::vector<Detection> recipe_mf3(const SequenceResult& result) {
  // Index of the top-scoring fused detection per frame (-1 = none).
  std::vector<int> top(result.per_frame.size(), -1);
  for (std::size_t f = 0; f < result.per_frame.size(); ++f) {
    const auto& dets = result.per_frame[f].fused;
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (top[f] < 0 || dets[i].score > dets[static_cast<std::size_t>(top[f])].score)
        top[f] = static_cast<int>(i);
  }
  std::vector<Detection> out;
  for (std::size_t f = 0; f < result.per_frame.size(); ++f) {
    for (std::size_t i = 0; i < result.per_frame[f].fused.size(); ++i) {
      Detection d = result.per_frame[f].fused[i];
      if (static_cast<int>(i) == top[f]) {
        // Median over the top-1 boxes of frames f-1, f, f+1 (existing only).
        std::vector<double> xs, ys, ws, hs;
        for (int df = -1; df <= 1; ++df) {
          int g = static_cast<int>(f) + df;
          if (g < 0 || g >= static_cast<int>(result.per_frame.size())) continue;
          if (top[static_cast<std::size_t>(g)] < 0) continue;
          const Box& b =
              result.per_frame[static_cast<std::size_t>(g)]
                  .fused[static_cast<std::size_t>(top[static_cast<std::size_t>(g)])]
                  .box;
          xs.push_back(b.cx());
          ys.push_back(b.cy());
          ws.push_back(b.w);
          hs.push_back(b.h);
        }
        if (!xs.empty()) {
          double w = med3(ws), h = med3(hs);
          d.box = Box{med3(xs) - w / 2, med3(ys) - h / 2, w, h};
        }
      }
      out.push_back(d);
    }
  }
  return out;
}

std::vector<Detection> recipe_sky(const SequenceResult& result,
                                  const SensorGeometry& geometry) {
  std::vector<Detection> out;
  const double mid = geometry.height / 2.0;
  for (const auto& fr : result.per_frame) {
    for (Detection d : fr.fused) {
      d.score *= (d.box.cy() <= mid) ? 1.25 : 0.75;
      out.push_back(d);
    }
  }
  return out;
}

std::vector<Detection> recipe_shadow(const SequenceResult& result,
                                     const ChannelConfig& cfg,
                                     const SensorGeometry& geometry) {
  std::vector<Detection> out;
  for (std::size_t f = 0; f < result.per_frame.size(); ++f) {
    std::vector<Detection> dets = result.per_frame[f].fused;
    shadow_rescore(dets, result.frames[f], geometry, cfg.shadow_weights);
    out.insert(out.end(), dets.begin(), dets.end());
  }
  return out;
}

std::vector<Detection> recipe_union_6ch(const SequenceResult& result,
                                        const ChannelConfig& cfg,
                                        const SensorGeometry& geometry) {
  // Shadow rescoring folded into the candidate pool, then the same
  // IoU-distinct union and support scaling as the base pipeline.
  std::vector<Detection> out;
  for (std::size_t f = 0; f < result.per_frame.size(); ++f) {
    std::vector<Detection> cands = result.per_frame[f].candidates;
    shadow_rescore(cands, result.frames[f], geometry, cfg.shadow_weights);
    std::vector<Detection> fused = iou_union(cands, cfg.union_tau);
    support_confidence(fused, cands, cfg.support_iou, cfg.support_gain);
    out.insert(out.end(), fused.begin(), fused.end());
  }
  return out;
}

}  // namespace

std::vector<Detection> apply_recipe(Recipe recipe, const SequenceResult& result,
                                    const ChannelConfig& cfg,
                                    const SensorGeometry& geometry) {
  if (result.per_frame.size() != result.frames.size())
    throw DataError("apply_recipe: result frames/per_frame mismatch");
  switch (recipe) {
    case Recipe::no_op:
      return result.all_fused();
    case Recipe::raw:
      return result.all_candidates();
    case Recipe::mf3:
      return recipe_mf3(result);
    case Recipe::sky:
      return recipe_sky(result, geometry);
    case Recipe::shadow:
      return recipe_shadow(result, cfg, geometry);
    case Recipe::union_6ch:
      return recipe_union_6ch(result, cfg, geometry);
  }
  throw UsageError("apply_recipe: unknown recipe");
}

}  // namespace spikedet
