#include "phykan/train.hpp"

#include "phykan/adam.hpp"
#include "phykan/rng.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace phykan::train {

std::map<std::string, std::string> TrainConfig::as_metadata() const {
    std::map<std::string, std::string> m;
    m["shape"] = shape;
    m["variant"] = variant;
    m["latent"] = std::to_string(latent);
    m["layers"] = std::to_string(layers);
    m["lr"] = std::to_string(lr);
    m["steps"] = std::to_string(steps);
    m["batch"] = std::to_string(batch);
    m["seed"] = std::to_string(seed);
    m["green_init"] = green_init ? "true" : "false";
    m["frequency"] = std::to_string(frequency);
    m["angle_harmonics"] = std::to_string(angle_harmonics);
    return m;
}

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "shape") cfg.shape = value;
    else if (key == "variant") cfg.variant = value;
    else if (key == "latent") cfg.latent = std::stol(value);
    else if (key == "layers") cfg.layers = std::stoi(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "steps") cfg.steps = std::stol(value);
    else if (key == "batch") cfg.batch = std::stol(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "green_init") cfg.green_init = (value == "true" || value == "1");
    else if (key == "frequency") cfg.frequency = std::stod(value);
    else if (key == "angle_harmonics") cfg.angle_harmonics = std::stoi(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

TrainConfig load_train_config(const std::string& path, const TrainConfig& defaults) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path);
    TrainConfig cfg = defaults;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (blank) continue;
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

mesh::TriMesh make_shape(const std::string& name) {
    if (name == "cube") return mesh::make_cube(0.3, 4);
    if (name == "sphere") return mesh::make_sphere(0.15, 2);
    if (name == "cone") return mesh::make_cone(0.15, 0.3, 18, 5);
    if (name == "assembly") return mesh::make_assembly();
    throw std::invalid_argument("unknown shape '" + name + "' (expected cube|sphere|cone|assembly)");
}

TrainResult train_model(model::PhyKanModel& m, const TrainConfig& cfg,
                        const std::function<void(long, double)>& progress) {
    if (cfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    auto params = m.parameters();
    ad::Adam opt(params, {.lr = cfg.lr});
    Rng angles(Rng::substream(cfg.seed, 0xa19735));

    TrainResult out;
    out.curve.reserve(cfg.steps);
    {
        std::vector<em::PlaneWave> probe = {em::PlaneWave::vertical(M_PI / 3.0, M_PI / 5.0)};
        out.initial_loss = m.zero_baseline_loss(probe);
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_values;

    for (long step = 0; step < cfg.steps; ++step) {
        std::vector<em::PlaneWave> batch;
        batch.reserve(cfg.batch);
        for (long u = 0; u < cfg.batch; ++u)
            batch.push_back(em::PlaneWave::vertical(angles.uniform(0.0, M_PI), angles.uniform(0.0, M_PI)));

        ad::Tape tape;
        ad::Tensor loss = m.loss_graph(tape, batch);
        double lv = loss.scalar_value();
        if (!std::isfinite(lv) || lv > 1e6)
            throw TrainError("training diverged at step " + std::to_string(step) + " (loss " +
                             std::to_string(lv) + "); lower the learning rate or check the kernel config");
        if (lv < best) {
            best = lv;
            best_values.clear();
            for (auto* p : params) best_values.push_back(p->value());
        }
        out.curve.push_back({step, lv, best});
        if (progress) progress(step, lv);

        for (auto* p : params) p->zero_grad();
        tape.backward(loss);
        opt.step();
    }
    if (!best_values.empty())
        for (size_t i = 0; i < params.size(); ++i) params[i]->value() = best_values[i];
    out.final_loss = best;
    return out;
}

std::vector<em::PlaneWave> evaluation_grid() {
    std::vector<em::PlaneWave> waves;
    for (int i = 0; i < 19; ++i)
        for (int j = 0; j < 19; ++j)
            waves.push_back(em::PlaneWave::vertical(M_PI * i / 18.0, M_PI * j / 18.0));
    return waves;
}

double evaluate_mse(model::PhyKanModel& m, const std::vector<em::PlaneWave>& waves,
                    const std::vector<model::WaveCurrents>& refs) {
    if (waves.size() != refs.size()) throw std::invalid_argument("evaluate_mse: wave/ref count mismatch");
    // chunked prediction keeps the per-pass tensors small
    std::vector<model::WaveCurrents> pre;
    pre.reserve(waves.size());
    const size_t chunk = 32;
    for (size_t i = 0; i < waves.size(); i += chunk) {
        std::vector<em::PlaneWave> part(waves.begin() + i,
                                        waves.begin() + std::min(waves.size(), i + chunk));
        auto got = m.predict(part);
        pre.insert(pre.end(), got.begin(), got.end());
    }
    return model::reconstruction_mse(pre, refs);
}

}  // namespace phykan::train
