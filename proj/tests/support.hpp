// Copyright the gapcheck authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef GAPCHECK_TESTS_SUPPORT_HPP
#define GAPCHECK_TESTS_SUPPORT_HPP

#include <cstdint>
#include <random>
#include "gapcheck/linalg.hpp"

namespace gapcheck::testing
{

// Seeded generator for property tests. Every test names its own seed so failures replay.
class Generator
{
  std::mt19937_64 rng;

public:
  explicit Generator(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi)
  {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }

  Index integer(Index lo, Index hi)
  {
    return std::uniform_int_distribution<Index>(lo, hi)(rng);
  }

  Matrix matrix(Index rows, Index cols)
  {
    std::normal_distribution<double> normal;
    Matrix X(rows, cols);
    for (Index j = 0; j < cols; ++j)
    {
      for (Index i = 0; i < rows; ++i)
      {
        X(i, j) = normal(rng);
      }
    }
    return X;
  }

  Vector vector(Index n) { return matrix(n, 1); }

  Matrix symmetric(Index n)
  {
    const Matrix X = matrix(n, n);
    return 0.5 * (X + X.transpose());
  }

  // CᵀC + shift·I.
  Matrix spd(Index n, double shift = 1.0)
  {
    const Matrix C = matrix(n, n);
    return C.transpose() * C + shift * Matrix::Identity(n, n);
  }

  // Positive semidefinite of the given rank.
  Matrix psd(Index n, Index rank)
  {
    const Matrix C = matrix(rank, n);
    return C.transpose() * C;
  }
};

}  // namespace gapcheck::testing

#endif  // GAPCHECK_TESTS_SUPPORT_HPP
