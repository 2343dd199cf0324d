#pragma once

#include "phykan/model.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace phykan::train {

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::string shape = "cube";
    std::string variant = "bspline";
    long latent = 64;
    int layers = 3;  // fixed by the stack; recorded in metadata
    double lr = 1e-3;
    long steps = 3000;
    long batch = 8;  // incident angles per step
    std::uint64_t seed = 1;
    bool green_init = true;
    double frequency = 1e9;
    int angle_harmonics = 4;

    std::map<std::string, std::string> as_metadata() const;
};

// key = value config file; '#' comments, unknown keys rejected
TrainConfig load_train_config(const std::string& path, const TrainConfig& defaults = {});
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);

struct StepRecord {
    long step;
    double loss;
    double best;  // best-so-far
};

struct TrainResult {
    std::vector<StepRecord> curve;
    double initial_loss = 0.0;  // zero-current baseline
    double final_loss = 0.0;    // best achieved; model holds these parameters
};

// Unsupervised training on randomly drawn incidence angles in [0, pi]^2.
// Deterministic for a fixed seed (single-threaded); restores the best
// parameters into the model before returning. Aborts with TrainError on
// divergence (non-finite or loss > 1e6).
TrainResult train_model(model::PhyKanModel& m, const TrainConfig& cfg,
                        const std::function<void(long, double)>& progress = {});

// mesh for a named canonical shape at experiment-scale tessellation
mesh::TriMesh make_shape(const std::string& name);

// held-out evaluation grid: 19 x 19 over [0, pi]^2 (10 degree steps)
std::vector<em::PlaneWave> evaluation_grid();

// normalized reconstruction MSE of model predictions against references over
// a wave set (references in matching order)
double evaluate_mse(model::PhyKanModel& m, const std::vector<em::PlaneWave>& waves,
                    const std::vector<model::WaveCurrents>& refs);

}  // namespace phykan::train
