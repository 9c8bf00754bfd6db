#pragma once

#include <map>
#include <string>
#include <vector>

#include "spikedet/channels.hpp"

namespace spikedet {

// Detection post-processors selectable per cohort. Pool L4 is the first
// four; L6 adds the last two.
enum class Recipe {
  no_op = 0,
  shadow,     // shadow-feature rescoring of the fused set
  mf3,        // median-3 temporal smoothing of the per-frame top-1 box
  raw,        // candidate pool without union dedup
  union_6ch,  // re-union with shadow rescoring folded in
  sky,        // upper-image prior reweighting
};

const char* recipe_name(Recipe r);
Recipe recipe_from_name(const std::string& name);

enum class LeverPool { l4, l6 };
enum class LeverMode { label_free, label_efficient };

// Pool members in tie-break order.
std::vector<Recipe> pool_recipes(LeverPool pool);

struct LeverMap {
  std::map<int, Recipe> by_cohort;

  // Unmapped cohorts fall back to no_op.
  Recipe lookup(int cohort) const {
    auto it = by_cohort.find(cohort);
    return it == by_cohort.end() ? Recipe::no_op : it->second;
  }
};

// Per non-empty cohort, argmax over the pool of the mean per-sequence metric
// across the cohort's members; ties go to the earlier recipe in pool order.
// metrics[s] maps recipe -> metric for sequence s (must cover the pool).
// Which metric the caller supplies decides the supervision regime; ground
// truth never enters through this interface.
LeverMap build_lever_map(const std::vector<int>& cohort_of_sequence,
                         const std::vector<std::map<Recipe, double>>& metrics,
                         LeverPool pool);

// active_cohorts * log2(pool_size) bits of supervision.
double supervision_bits(int active_cohorts, int pool_size);

// Apply a recipe to a processed sequence; returns the detection list the
// recipe produces (geometry needed by the sky prior).
std::vector<Detection> apply_recipe(Recipe recipe, const SequenceResult& result,
                                    const ChannelConfig& cfg,
                                    const SensorGeometry& geometry);

}  // namespace spikedet
