#pragma once

namespace eit {

// Benchmark protocol defaults (simulation units, disk scaled to unit radius).
inline constexpr int kDefaultElectrodes = 16;
inline constexpr double kDefaultCoverage = 0.45;
inline constexpr int kCoarseElements = 5248;   // inverse mesh
inline constexpr int kDenseElements = 8072;    // simulation mesh
inline constexpr double kDefaultBackground = 1.31;
inline constexpr double kDefaultAmplitude = 0.002;  // adjacent patterns, 2 mA
inline constexpr double kDefaultNoiseDelta = 0.005;
inline constexpr double kDefaultContactImpedance = 1e-2;

// Conductivity admissibility box.
inline constexpr double kSigmaLower = 1e-3;
inline constexpr double kSigmaUpper = 10.0;

// Smoothness prior of the linearized reconstructor.
inline constexpr double kPriorA = 0.15 * 0.15;
inline constexpr double kPriorB = 0.2;

// Regularization weights tuned on a validation split of the simulated
// ellipse protocol (see README).
inline constexpr double kDefaultLinRecAlpha = 3.0;

}  // namespace eit
