#pragma once

// Published GTZAN figures used as fixtures.

#include <string>
#include <vector>

namespace caudit::testing {

inline const std::vector<std::string> kGtzanLabels = {"blues", "classical", "country", "disco", "hiphop",
                                                      "jazz",  "metal",     "pop",     "reggae", "rock"};

// Paired label scores, row g scored against every label r.
inline const std::vector<std::vector<double>> kPairedScores = {
    {0.0841, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {0, 0.1261, 0, 0, 0, 0, 0, 0, 0, 0},
    {0, 0, 0.0947, 0, 0, 0, 0, 0, 0, 0},
    {0, 0, 0, 0.0527, 0.0008, 0, 0.0012, 0.0124, 0, 0.0055},
    {0, 0, 0, 0.0008, 0.0791, 0, 0.0004, 0.0016, 0, 0.0014},
    {0, 0, 0, 0, 0, 0.0830, 0, 0, 0, 0.0025},
    {0, 0, 0, 0.0012, 0.0004, 0, 0.0367, 0.0017, 0, 0.0158},
    {0, 0, 0, 0.0124, 0.0016, 0, 0.0017, 0.0453, 0, 0.0089},
    {0, 0, 0, 0, 0, 0, 0, 0, 0.1220, 0},
    {0, 0, 0, 0.0055, 0.0014, 0.0025, 0.0158, 0.0089, 0, 0.0249}};
inline const std::vector<double> kPairedDeltas = {0.0084, 0.0126, 0.0095, 0.0040, 0.0078,
                                                  0.0081, 0.0021, 0.0033, 0.0122, 0.0009};

// Mislabel-only confusion: rows predicted, columns true label.
inline const std::vector<std::vector<double>> kPerfectConfusion = {
    {100, 0, 1, 1, 0, 0, 0, 0.1, 0, 1},
    {0, 100, 0, 0, 0, 2, 0, 0.1, 0, 0},
    {0, 0, 99, 0, 0, 0, 0, 0.1, 0, 1},
    {0, 0, 0, 92, 0, 0, 0, 2.1, 0, 0},
    {0, 0, 0, 1, 96.5, 0, 0, 0.6, 1, 0},
    {0, 0, 0, 0, 0, 98, 0, 0.1, 0, 4},
    {0, 0, 0, 0, 0, 0, 90, 0.1, 0, 4},
    {0, 0, 0, 5, 3.5, 0, 0, 95.6, 0, 15},
    {0, 0, 0, 0, 0, 0, 0, 0.1, 99, 0},
    {0, 0, 0, 1, 0, 0, 10, 1.1, 0, 75}};
// x 10^-2, as printed
inline const std::vector<double> kPerfectPrecision = {97.0, 97.9, 98.9, 97.8, 95.5, 96.0, 95.6, 79.9, 99.9, 86.1};
inline const std::vector<double> kPerfectFscore = {98.5, 98.9, 98.9, 94.8, 95.8, 97.0, 92.7, 87.0, 99.4, 80.2};
inline constexpr double kPerfectAccuracy = 94.5;

}  // namespace caudit::testing
