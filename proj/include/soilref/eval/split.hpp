#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "soilref/core/types.hpp"

namespace soilref::eval {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

using SplitRatios = std::array<int, 3>;
inline constexpr SplitRatios kDefaultRatios{6, 2, 2};

/// Bit c-1 set when soiling class c (1..3) occurs in the map.
int presence_key(const LabelMap& map);

/// Largest-remainder apportionment of n items over the ratio weights; ties
/// in the remainder go to the earlier split.
std::array<int, 3> apportion(int n, const SplitRatios& ratios);

/// Assigns each item to a split so that every bucket (equal key) is divided
/// in the given ratio and the split sizes equal apportion(n). Members of a
/// bucket are shuffled with the seed before assignment. Throws for n < 10.
std::vector<Split> stratified_split(const std::vector<int>& keys, std::uint64_t seed,
                                    const SplitRatios& ratios = kDefaultRatios);

}  // namespace soilref::eval
