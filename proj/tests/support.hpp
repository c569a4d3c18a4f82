#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "gridmine/core_data.hpp"

namespace gridmine::testing
{
/// Six well separated 2-D blobs, 322 points in total.
inline GaussianMixtureSpec SixBlobSpec(std::uint64_t seed)
{
  const std::vector<Point> centers{{0.2, 0.2}, {0.5, 0.2}, {0.8, 0.2},
                                   {0.2, 0.7}, {0.5, 0.7}, {0.8, 0.7}};
  const std::vector<std::size_t> counts{54, 54, 54, 54, 53, 53};
  GaussianMixtureSpec spec;
  spec.seed = seed;
  for (std::size_t i = 0; i < centers.size(); ++i)
  {
    spec.components.push_back({centers[i], 0.025, counts[i]});
  }
  return spec;
}

inline constexpr double kSixBlobCentralEps = 0.022;
inline constexpr double kSixBlobLocalEps = 0.0275;
inline constexpr int kSixBlobMinpts = 4;

/// Three 4-D blobs at the class means of the Iris data, 50 points each.
inline GaussianMixtureSpec IrisLikeSpec(std::uint64_t seed, double stdev = 0.3)
{
  GaussianMixtureSpec spec;
  spec.seed = seed;
  spec.components = {{{5.006, 3.428, 1.462, 0.246}, stdev, 50},
                     {{5.936, 2.770, 4.260, 1.326}, stdev, 50},
                     {{6.588, 2.974, 5.552, 2.026}, stdev, 50}};
  return spec;
}

/// Labels as a set of member sets, ignoring label values. Negative labels
/// are collected into a separate noise set.
inline std::pair<std::set<std::set<std::size_t>>, std::set<std::size_t>> AsPartition(
    const std::vector<int>& labels)
{
  std::map<int, std::set<std::size_t>> groups;
  std::set<std::size_t> noise;
  for (std::size_t i = 0; i < labels.size(); ++i)
  {
    if (labels[i] < 0)
    {
      noise.insert(i);
    }
    else
    {
      groups[labels[i]].insert(i);
    }
  }
  std::set<std::set<std::size_t>> out;
  for (auto& [label, members] : groups)
  {
    out.insert(members);
  }
  return {out, noise};
}

}  // namespace gridmine::testing
