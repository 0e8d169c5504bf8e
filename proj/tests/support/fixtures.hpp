#pragma once

// Shared setup for tests that need a trained classifier.

#include <utility>

#include "symgrad/dataset.hpp"
#include "symgrad/neuralnet.hpp"

namespace fixture {

struct Trained {
    symgrad::Dataset train;
    symgrad::Dataset val;
    symgrad::MlpModel model;
};

/// Desk-scale pipeline: generate, split 80/20, train with the default configuration.
inline Trained trained_experiment(int id, std::size_t n, symgrad::Seed seed, std::vector<std::size_t> hidden = {128, 128}) {
    const auto ds = symgrad::generate_experiment({id, n, seed, 0.01, std::nullopt});
    auto [tr, va] = symgrad::split(ds, 0.8, seed);
    symgrad::TrainConfig cfg;
    cfg.hidden = std::move(hidden);
    cfg.seed = seed;
    auto result = symgrad::train(symgrad::init_model(ds.features(), cfg.hidden, seed), tr, va, cfg);
    return {std::move(tr), std::move(va), std::move(result.model)};
}

}  // namespace fixture
