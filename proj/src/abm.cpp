#include "abmuq/abm.hpp"

#include <array>
#include <sstream>

#include "abmuq/errors.hpp"
#include "abmuq/parallel.hpp"

namespace abmuq::abm {

void SimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid SimConfig: ") + what);
  };
  require(sheep_repro >= 0.0 && sheep_repro <= 1.0, "sheep_repro must lie in [0,1]");
  require(wolf_repro >= 0.0 && wolf_repro <= 1.0, "wolf_repro must lie in [0,1]");
  require(init_sheep >= 0, "init_sheep must be >= 0");
  require(init_wolves >= 0, "init_wolves must be >= 0");
  require(wolf_gain_from_food > 0, "wolf_gain_from_food must be > 0");
  require(wolf_init_energy > 0, "wolf_init_energy must be > 0");
  require(grid_size >= 1, "grid_size must be >= 1");
  require(max_steps >= 1, "max_steps must be >= 1");
  require(sheep_cap >= 1, "sheep_cap must be >= 1");
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json{{"sheep_repro", c.sheep_repro},
                     {"wolf_repro", c.wolf_repro},
                     {"init_sheep", c.init_sheep},
                     {"init_wolves", c.init_wolves},
                     {"wolf_gain_from_food", c.wolf_gain_from_food},
                     {"wolf_init_energy", c.wolf_init_energy},
                     {"grid_size", c.grid_size},
                     {"max_steps", c.max_steps},
                     {"sheep_cap", c.sheep_cap}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  if (!j.is_object()) throw ConfigError("SimConfig must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "sheep_repro") c.sheep_repro = value.get<double>();
      else if (key == "wolf_repro") c.wolf_repro = value.get<double>();
      else if (key == "init_sheep") c.init_sheep = value.get<int>();
      else if (key == "init_wolves") c.init_wolves = value.get<int>();
      else if (key == "wolf_gain_from_food") c.wolf_gain_from_food = value.get<int>();
      else if (key == "wolf_init_energy") c.wolf_init_energy = value.get<int>();
      else if (key == "grid_size") c.grid_size = value.get<int>();
      else if (key == "max_steps") c.max_steps = value.get<int>();
      else if (key == "sheep_cap") c.sheep_cap = value.get<int>();
      else throw ConfigError("unknown SimConfig key: " + key);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("SimConfig key " + key + ": " + e.what());
    }
  }
  c.validate();
}

std::string WorldState::serialize() const {
  std::ostringstream os;
  os << "step " << step << "\nsheep " << sheep.size() << '\n';
  for (const auto& s : sheep) os << s.x << ' ' << s.y << '\n';
  os << "wolves " << wolves.size() << '\n';
  for (const auto& w : wolves) os << w.x << ' ' << w.y << ' ' << w.energy << '\n';
  os << "rng " << rng << '\n';
  return os.str();
}

WorldState initial_state(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState state;
  state.rng.seed(seed);
  const auto g = static_cast<std::size_t>(config.grid_size);
  state.sheep.reserve(static_cast<std::size_t>(config.init_sheep));
  for (int i = 0; i < config.init_sheep; ++i) {
    const int x = static_cast<int>(uniform_index(state.rng, g));
    const int y = static_cast<int>(uniform_index(state.rng, g));
    state.sheep.push_back({x, y});
  }
  state.wolves.reserve(static_cast<std::size_t>(config.init_wolves));
  for (int i = 0; i < config.init_wolves; ++i) {
    const int x = static_cast<int>(uniform_index(state.rng, g));
    const int y = static_cast<int>(uniform_index(state.rng, g));
    state.wolves.push_back({x, y, config.wolf_init_energy});
  }
  return state;
}

namespace {

constexpr std::array<std::array<int, 2>, 8> kNeighbourhood{{
    {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

int wrap(int v, int g) {
  v %= g;
  return v < 0 ? v + g : v;
}

template <class Agent>
void move(Agent& a, int g, Rng& rng) {
  const auto& d = kNeighbourhood[uniform_index(rng, kNeighbourhood.size())];
  a.x = wrap(a.x + d[0], g);
  a.y = wrap(a.y + d[1], g);
}

}  // namespace

WorldState step(WorldState state, const SimConfig& config, StepTrace* trace) {
  const int g = config.grid_size;
  Rng& rng = state.rng;

  long long energy_before = 0;
  for (const auto& w : state.wolves) energy_before += w.energy;

  // Move.
  for (auto& s : state.sheep) move(s, g, rng);
  for (auto& w : state.wolves) {
    move(w, g, rng);
    w.energy -= 1;
  }

  // Feed. Sheep are bucketed per cell; an eaten sheep leaves its bucket at
  // once so it cannot be eaten twice.
  int meals = 0;
  if (!state.wolves.empty() && !state.sheep.empty()) {
    const std::size_t cells = static_cast<std::size_t>(g) * static_cast<std::size_t>(g);
    std::vector<int> bucket_start(cells + 1, 0);
    for (const auto& s : state.sheep) ++bucket_start[static_cast<std::size_t>(s.y * g + s.x) + 1];
    for (std::size_t c = 0; c < cells; ++c) bucket_start[c + 1] += bucket_start[c];
    std::vector<int> bucket_size(cells, 0);
    std::vector<int> members(state.sheep.size());
    for (std::size_t i = 0; i < state.sheep.size(); ++i) {
      const auto c = static_cast<std::size_t>(state.sheep[i].y * g + state.sheep[i].x);
      members[static_cast<std::size_t>(bucket_start[c] + bucket_size[c]++)] = static_cast<int>(i);
    }
    std::vector<char> eaten(state.sheep.size(), 0);
    for (auto& w : state.wolves) {
      const auto c = static_cast<std::size_t>(w.y * g + w.x);
      int& size = bucket_size[c];
      if (size == 0) continue;
      const int base = bucket_start[c];
      const auto pick = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(size)));
      const int victim = members[static_cast<std::size_t>(base + pick)];
      // Keep the remaining members in their original relative order.
      for (int k = pick; k + 1 < size; ++k) {
        members[static_cast<std::size_t>(base + k)] = members[static_cast<std::size_t>(base + k + 1)];
      }
      --size;
      eaten[static_cast<std::size_t>(victim)] = 1;
      w.energy += config.wolf_gain_from_food;
      ++meals;
    }
    if (meals > 0) {
      std::vector<Sheep> survivors;
      survivors.reserve(state.sheep.size() - static_cast<std::size_t>(meals));
      for (std::size_t i = 0; i < state.sheep.size(); ++i) {
        if (!eaten[i]) survivors.push_back(state.sheep[i]);
      }
      state.sheep = std::move(survivors);
    }
  }

  if (trace != nullptr) {
    trace->energy_before = energy_before;
    trace->wolves_moved = static_cast<int>(state.wolves.size());
    trace->meals = meals;
    long long after = 0;
    for (const auto& w : state.wolves) after += w.energy;
    trace->energy_after_feeding = after;
  }

  // Reproduce. Offspring are appended after the parents and do not act
  // until the next tick.
  const std::size_t n_sheep = state.sheep.size();
  for (std::size_t i = 0; i < n_sheep; ++i) {
    if (bernoulli(rng, config.sheep_repro)) state.sheep.push_back(state.sheep[i]);
  }
  const std::size_t n_wolves = state.wolves.size();
  for (std::size_t i = 0; i < n_wolves; ++i) {
    if (bernoulli(rng, config.wolf_repro)) {
      Wolf child = state.wolves[i];
      child.energy = state.wolves[i].energy / 2;
      state.wolves[i].energy -= child.energy;
      state.wolves.push_back(child);
    }
  }

  // Cull.
  std::erase_if(state.wolves, [](const Wolf& w) { return w.energy <= 0; });

  ++state.step;
  return state;
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Extinct: return "extinct";
    case OutcomeKind::CensoredHorizon: return "censored_horizon";
    case OutcomeKind::CensoredCap: return "censored_cap";
  }
  return "unknown";
}

OutcomeKind outcome_kind_from_string(const std::string& s) {
  if (s == "extinct") return OutcomeKind::Extinct;
  if (s == "censored_horizon") return OutcomeKind::CensoredHorizon;
  if (s == "censored_cap") return OutcomeKind::CensoredCap;
  throw ConfigError("unknown outcome: " + s);
}

SimOutcome run(const SimConfig& config, std::uint64_t seed) {
  WorldState state = initial_state(config, seed);
  auto finish = [&](OutcomeKind kind) {
    return SimOutcome{kind, state.step, static_cast<int>(state.sheep.size()),
                      static_cast<int>(state.wolves.size())};
  };
  if (state.wolves.empty()) return finish(OutcomeKind::Extinct);
  while (true) {
    state = step(std::move(state), config);
    if (state.wolves.empty()) return finish(OutcomeKind::Extinct);
    if (static_cast<long long>(state.sheep.size()) > config.sheep_cap) {
      return finish(OutcomeKind::CensoredCap);
    }
    if (state.step >= config.max_steps) return finish(OutcomeKind::CensoredHorizon);
  }
}

std::uint64_t replicate_seed(std::uint64_t base_seed, int index) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

std::vector<SimOutcome> run_replicates(const SimConfig& config,
                                       std::uint64_t base_seed, int r, int jobs) {
  if (r < 1) throw ConfigError("run_replicates needs r >= 1");
  config.validate();
  std::vector<SimOutcome> out(static_cast<std::size_t>(r));
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = run(config, replicate_seed(base_seed, static_cast<int>(i)));
  });
  return out;
}

}  // namespace abmuq::abm
