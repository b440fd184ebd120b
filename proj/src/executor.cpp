#include "aerialnav/executor.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>

#include "aerialnav/errors.hpp"

namespace aerialnav {

// ---------------------------------------------------------------------------
// State machine

std::string to_string(ExecState state) {
  switch (state) {
    case ExecState::Idle: return "IDLE";
    case ExecState::Navigating: return "NAVIGATING";
    case ExecState::Replanning: return "REPLANNING";
    case ExecState::TaskComplete: return "TASK_COMPLETE";
  }
  return "?";
}

std::string to_string(ExecEvent event) {
  switch (event) {
    case ExecEvent::DecisionReady: return "DecisionReady";
    case ExecEvent::Complete: return "Complete";
    case ExecEvent::ReplanRequested: return "ReplanRequested";
    case ExecEvent::TrajectoryExhausted: return "TrajectoryExhausted";
    case ExecEvent::RefineInfeasible: return "RefineInfeasible";
    case ExecEvent::Reset: return "Reset";
  }
  return "?";
}

ExecState exec_state_from_string(const std::string& text) {
  for (ExecState s : kAllStates)
    if (to_string(s) == text) return s;
  throw InvalidInput("unknown executor state '" + text + "'");
}

ExecEvent exec_event_from_string(const std::string& text) {
  for (ExecEvent e : kAllEvents)
    if (to_string(e) == text) return e;
  throw InvalidInput("unknown executor event '" + text + "'");
}

Transition transition(ExecState state, ExecEvent event) {
  using S = ExecState;
  using E = ExecEvent;
  if (event == E::Reset) return {S::Idle, true};
  switch (state) {
    case S::TaskComplete:
      return {S::TaskComplete, true};
    case S::Idle:
      if (event == E::DecisionReady) return {S::Navigating, true};
      if (event == E::Complete) return {S::TaskComplete, true};
      break;
    case S::Navigating:
      if (event == E::Complete) return {S::TaskComplete, true};
      if (event == E::DecisionReady) return {S::Navigating, true};
      if (event == E::ReplanRequested || event == E::TrajectoryExhausted || event == E::RefineInfeasible)
        return {S::Replanning, true};
      break;
    case S::Replanning:
      if (event == E::DecisionReady) return {S::Navigating, true};
      if (event == E::Complete) return {S::TaskComplete, true};
      break;
  }
  return {state, false};
}

ExecState step_state_machine(ExecState state, ExecEvent event) { return transition(state, event).next; }

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Success: return "Success";
    case Outcome::Collision: return "Collision";
    case Outcome::Timeout: return "Timeout";
    case Outcome::PolicyLost: return "PolicyLost";
  }
  return "?";
}

Outcome outcome_from_string(const std::string& text) {
  for (Outcome o : {Outcome::Success, Outcome::Collision, Outcome::Timeout, Outcome::PolicyLost})
    if (to_string(o) == text) return o;
  throw InvalidInput("unknown outcome '" + text + "'");
}

// ---------------------------------------------------------------------------
// Config

RefineConfig ExecutorConfig::margins_for(double drone_radius) const {
  RefineConfig r = refine;
  r.s_min += drone_radius;
  r.s_clear += drone_radius;
  return r;
}

namespace {

int tick_ratio(double fast, double slow, const char* what) {
  const double ratio = fast / slow;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio)
    throw InvalidInput(std::string("ExecutorConfig: control rate must be an integer multiple of the ") + what);
  return static_cast<int>(rounded);
}

}  // namespace

void ExecutorConfig::validate() const {
  if (!(control_rate > 0.0) || !(policy_rate > 0.0) || !(record_rate > 0.0))
    throw InvalidInput("ExecutorConfig: rates must be positive");
  if (1.0 / control_rate > 0.1) throw InvalidInput("ExecutorConfig: control rate must be at least 10 Hz");
  tick_ratio(control_rate, policy_rate, "policy rate");
  tick_ratio(control_rate, record_rate, "record rate");
  if (!(timeout_s > 0.0)) throw InvalidInput("ExecutorConfig: timeout must be positive");
  if (!(knot_span > 0.0)) throw InvalidInput("ExecutorConfig: knot span must be positive");
  simulate_policy_latency(latency);
  refine.validate();
}

// ---------------------------------------------------------------------------
// Episode

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct PlanOutcome {
  std::optional<BSpline> trajectory;
  InfeasibleReason reason = InfeasibleReason::None;
  RefineStats stats;
};

// Planning shared by both modes: straight reference to the waypoint, refined
// against the newest cloud.
class Planner {
 public:
  Planner(const ScenarioSpec& scenario, const ExecutorConfig& config)
      : scenario_(scenario), config_(config), refine_(config.margins_for(scenario.drone_radius)) {}

  const RefineConfig& refine_config() const { return refine_; }

  PlanOutcome plan(const SimState& state, const Vec3& accel, const Vec3& target,
                   const LocalObstacleCloud* cloud) const {
    PlanOutcome out;
    BSpline reference = init_straight(state, accel, target, scenario_.limits, config_.knot_span);
    if (!config_.refine_enabled || cloud == nullptr) {
      out.trajectory = reallocate_time(reference, scenario_.limits.v_max, scenario_.limits.a_max);
      return out;
    }
    auto r = refine(reference, *cloud, refine_, scenario_.limits);
    out.stats = r.stats;
    out.reason = r.reason;
    out.trajectory = std::move(r.trajectory);
    return out;
  }

  /// Stop along the current velocity with the available deceleration.
  BSpline brake(const SimState& state) const {
    const double speed = state.velocity.norm();
    const Vec3 stop = state.pose.position + state.velocity * (speed / (2.0 * scenario_.limits.a_max));
    BSpline b = init_straight(state, Vec3::Zero(), stop, scenario_.limits, config_.knot_span);
    return reallocate_time(b, scenario_.limits.v_max, scenario_.limits.a_max);
  }

  bool still_safe(const BSpline& traj, double now, const LocalObstacleCloud& cloud) const {
    if (!config_.refine_enabled) return true;
    const double local = now - traj.start_time();
    if (local >= traj.duration()) return true;
    const SurfaceModel surface(cloud, refine_.s_clear, refine_.occlusion_radius);
    return verify_trajectory(traj, surface, refine_.s_min, std::max(local, 0.0)).ok;
  }

 private:
  const ScenarioSpec& scenario_;
  const ExecutorConfig& config_;
  RefineConfig refine_;
};

Vec3 reference_acceleration(const BSpline& traj, double now) {
  const double local = now - traj.start_time();
  if (local < 0.0 || local > traj.duration()) return Vec3::Zero();
  return evaluate(traj, local).acceleration;
}

BSpline hover_spline(const Pose4D& pose, const ScenarioSpec& scenario, double knot_span) {
  return init_straight(pose.position, Vec3::Zero(), Vec3::Zero(), pose.position, scenario.limits, knot_span, 0.0);
}

// Episode bookkeeping common to both modes.
class Recorder {
 public:
  explicit Recorder(EpisodeLog& log) : log_(log) {}

  ExecState apply(ExecState state, ExecEvent event, double t, const std::string& detail = {}) {
    const Transition tr = transition(state, event);
    EventRecord e;
    e.time = t;
    e.kind = tr.defined ? "transition" : "warning";
    e.detail = tr.defined ? detail : "undefined transition ignored";
    e.from = state;
    e.to = tr.next;
    e.event = event;
    log_.events.push_back(std::move(e));
    return tr.next;
  }

  void note(double t, std::string kind, std::string detail, std::optional<NavDecision> decision = std::nullopt) {
    EventRecord e;
    e.time = t;
    e.kind = std::move(kind);
    e.detail = std::move(detail);
    e.decision = std::move(decision);
    log_.events.push_back(std::move(e));
  }

  void frame(double t, const SimState& sim, std::optional<std::size_t> command_index) {
    FrameRecord f;
    f.time = t;
    f.pose = sim.pose;
    f.velocity = sim.velocity;
    f.command_index = command_index;
    f.depth_index = log_.frames.size();
    log_.frames.push_back(f);
  }

 private:
  EpisodeLog& log_;
};

std::string describe(const PlanOutcome& p) {
  return "rounds=" + std::to_string(p.stats.outer_rounds) + " iterations=" + std::to_string(p.stats.iterations) +
         " anchors=" + std::to_string(p.stats.anchors) + " result=" + to_string(p.reason);
}

EpisodeLog run_deterministic(const ScenarioSpec& scenario, Policy& policy, const ExecutorConfig& config) {
  EpisodeLog log;
  log.scenario = scenario;
  log.policy = policy.name();
  log.control_rate = config.control_rate;
  log.policy_rate = config.policy_rate;
  log.record_rate = config.record_rate;
  log.policy_latency = simulate_policy_latency(config.latency);

  const Planner planner(scenario, config);
  Recorder rec(log);
  const double dt = 1.0 / config.control_rate;
  const int policy_every = tick_ratio(config.control_rate, config.policy_rate, "policy rate");
  const int record_every = tick_ratio(config.control_rate, config.record_rate, "record rate");
  const auto latency_ticks = static_cast<std::int64_t>(std::ceil(log.policy_latency * config.control_rate - 1e-9));
  const auto last_tick = static_cast<std::int64_t>(std::llround(config.timeout_s * config.control_rate));

  SimState sim;
  sim.pose = scenario.start;
  ExecState exec = ExecState::Idle;
  BSpline active = hover_spline(scenario.start, scenario, config.knot_span);
  std::uint64_t generation = 0;
  log.trajectories.push_back({generation, active});
  double desired_yaw = scenario.start.yaw;
  double command_yaw = scenario.start.yaw;
  bool exhausted_reported = false;
  std::optional<NavDecision> last_decision;
  std::optional<LocalObstacleCloud> cloud;
  std::uint64_t next_seq = 0;

  struct Pending {
    std::int64_t arrival = 0;
    std::optional<NavDecision> decision;
  };
  std::optional<Pending> pending;

  auto swap_in = [&](BSpline traj, double t) {
    traj.set_start_time(t);
    active = std::move(traj);
    ++generation;
    exhausted_reported = false;
    log.trajectories.push_back({generation, active});
  };

  auto fall_back = [&](double t) {
    if (generation > 0 && cloud && planner.still_safe(active, t, *cloud)) return;
    swap_in(planner.brake(sim), t);
    rec.note(t, "refine", "brake");
  };

  auto deliver = [&](double t) {
    std::optional<NavDecision> d = std::move(pending->decision);
    pending.reset();
    if (!d) {
      rec.note(t, "no_decision", "");
      return;
    }
    rec.note(t, "decision", "", d);
    if (d->complete) {
      exec = rec.apply(exec, ExecEvent::Complete, t);
      return;
    }
    if (d->replan) exec = rec.apply(exec, ExecEvent::ReplanRequested, t, "policy request");
    desired_yaw = d->yaw;
    last_decision = d;
    const auto start = Clock::now();
    PlanOutcome p = planner.plan(sim, reference_acceleration(active, t), d->waypoint, cloud ? &*cloud : nullptr);
    log.timings.refine_ms += ms_since(start);
    rec.note(t, "refine", describe(p));
    if (p.trajectory) {
      swap_in(std::move(*p.trajectory), t);
      exec = rec.apply(exec, ExecEvent::DecisionReady, t);
    } else {
      exec = rec.apply(exec, ExecEvent::RefineInfeasible, t, to_string(p.reason));
      fall_back(t);
    }
  };

  auto end_tick = [&](std::int64_t k, Outcome outcome) {
    log.outcome = outcome;
    log.end_time = static_cast<double>(k) / config.control_rate;
    if (k % record_every == 0 && (log.frames.empty() || log.frames.back().time != log.end_time))
      rec.frame(log.end_time, sim, std::nullopt);
  };

  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / config.control_rate;
    sim.time = t;
    if (check_collision(scenario.world, sim.pose, scenario.drone_radius).collided) {
      end_tick(k, Outcome::Collision);
      break;
    }
    if (pending && pending->arrival <= k) deliver(t);
    if (exec == ExecState::TaskComplete) {
      end_tick(k, Outcome::Success);
      break;
    }

    if (k % policy_every == 0) {
      auto start = Clock::now();
      const Rigid3 view = camera_pose(sim.pose, scenario.camera);
      const DepthImage depth = render_depth(scenario.world, scenario.camera, view, t, config.perception.stride);
      cloud = backproject(depth, scenario.camera, view, config.perception);
      log.timings.perception_ms += ms_since(start);

      if (exec == ExecState::Navigating && generation > 0 && !planner.still_safe(active, t, *cloud)) {
        std::optional<BSpline> repaired;
        if (last_decision) {
          start = Clock::now();
          PlanOutcome p = planner.plan(sim, reference_acceleration(active, t), last_decision->waypoint, &*cloud);
          log.timings.refine_ms += ms_since(start);
          rec.note(t, "refine", "reverify " + describe(p));
          repaired = std::move(p.trajectory);
        }
        if (repaired) {
          swap_in(std::move(*repaired), t);
        } else {
          exec = rec.apply(exec, ExecEvent::RefineInfeasible, t, "re-verification failed");
          swap_in(planner.brake(sim), t);
          rec.note(t, "refine", "brake");
        }
      }

      if (!pending) {
        Observation obs;
        obs.pose = sim.pose;
        obs.instruction = scenario.instruction;
        obs.episode_time = t;
        obs.seq = next_seq++;
        if (policy.wants_depth())
          obs.depth = render_depth(scenario.world, scenario.camera, view, t);
        start = Clock::now();
        Pending p;
        p.arrival = k + latency_ticks;
        try {
          p.decision = policy.decide(obs);
          if (p.decision) validate(*p.decision);
        } catch (const ConnectionLost& e) {
          log.timings.policy_ms += ms_since(start);
          rec.note(t, "warning", std::string("policy lost: ") + e.what());
          end_tick(k, Outcome::PolicyLost);
          break;
        } catch (const Error& e) {
          rec.note(t, "warning", std::string("policy error: ") + e.what());
          p.decision.reset();
        }
        log.timings.policy_ms += ms_since(start);
        pending = std::move(p);
        if (pending->arrival <= k) deliver(t);
        if (exec == ExecState::TaskComplete) {
          end_tick(k, Outcome::Success);
          break;
        }
      }
    }

    if (exec == ExecState::Navigating && generation > 0 && !exhausted_reported && t >= active.end_time()) {
      exhausted_reported = true;
      exec = rec.apply(exec, ExecEvent::TrajectoryExhausted, t);
    }

    const auto start = Clock::now();
    const Command cmd =
        sample_command(active, t - active.start_time(), desired_yaw, command_yaw, scenario.limits.yaw_rate_max, dt);
    command_yaw = cmd.yaw;
    log.commands.push_back({cmd, generation});
    log.commands.back().command.timestamp = t;
    if (k % record_every == 0) rec.frame(t, sim, log.commands.size() - 1);
    if (k >= last_tick) {
      log.timings.control_ms += ms_since(start);
      log.outcome = Outcome::Timeout;
      log.end_time = t;
      break;
    }
    sim = step_plant(sim, cmd, dt, scenario.limits, scenario.plant);
    log.timings.control_ms += ms_since(start);
  }
  return log;
}

// Wall-clock mode: the decision producer runs on its own thread and publishes
// whole trajectories into a shared slot; the sampler only ever copies the
// slot's pointer under the lock.
EpisodeLog run_wall_clock(const ScenarioSpec& scenario, Policy& policy, const ExecutorConfig& config) {
  EpisodeLog log;
  log.scenario = scenario;
  log.policy = policy.name();
  log.control_rate = config.control_rate;
  log.policy_rate = config.policy_rate;
  log.record_rate = config.record_rate;
  log.policy_latency = simulate_policy_latency(config.latency);

  struct Slot {
    BSpline trajectory;
    std::uint64_t generation = 0;
    double desired_yaw = 0.0;
  };
  struct Arrival {
    double time = 0.0;
    std::optional<NavDecision> decision;
    std::optional<PlanOutcome> plan;
    bool lost = false;
    std::string error;
  };

  const Planner planner(scenario, config);
  Recorder rec(log);
  const double dt = 1.0 / config.control_rate;
  const int record_every = tick_ratio(config.control_rate, config.record_rate, "record rate");
  const auto last_tick = static_cast<std::int64_t>(std::llround(config.timeout_s * config.control_rate));

  std::mutex mutex;
  std::condition_variable wake;
  auto slot = std::make_shared<const Slot>(Slot{hover_spline(scenario.start, scenario, config.knot_span), 0,
                                                scenario.start.yaw});
  log.trajectories.push_back({0, slot->trajectory});
  SimState shared_sim;
  shared_sim.pose = scenario.start;
  std::deque<Arrival> arrivals;
  bool stop = false;
  const auto origin = Clock::now();

  std::thread producer([&] {
    std::uint64_t seq = 0;
    const auto period = std::chrono::duration<double>(1.0 / config.policy_rate);
    for (auto next = origin;; next += std::chrono::duration_cast<Clock::duration>(period)) {
      SimState sim;
      std::shared_ptr<const Slot> current;
      {
        std::unique_lock lock(mutex);
        if (wake.wait_until(lock, next, [&] { return stop; })) return;
        sim = shared_sim;
        current = slot;
      }
      const double t = sim.time;
      Arrival a;
      const Rigid3 view = camera_pose(sim.pose, scenario.camera);
      auto start = Clock::now();
      const LocalObstacleCloud cloud = backproject(
          render_depth(scenario.world, scenario.camera, view, t, config.perception.stride), scenario.camera, view,
          config.perception);
      const double perception_ms = ms_since(start);
      Observation obs;
      obs.pose = sim.pose;
      obs.instruction = scenario.instruction;
      obs.episode_time = t;
      obs.seq = seq++;
      if (policy.wants_depth()) obs.depth = render_depth(scenario.world, scenario.camera, view, t);
      start = Clock::now();
      try {
        a.decision = policy.decide(obs);
        if (a.decision) validate(*a.decision);
      } catch (const ConnectionLost& e) {
        a.lost = true;
        a.error = e.what();
      } catch (const Error& e) {
        a.decision.reset();
        a.error = e.what();
      }
      const double policy_ms = ms_since(start);
      const double remaining = log.policy_latency - policy_ms / 1000.0;
      if (remaining > 0.0) {
        std::unique_lock lock(mutex);
        if (wake.wait_for(lock, std::chrono::duration<double>(remaining), [&] { return stop; })) return;
      }
      double refine_ms = 0.0;
      std::shared_ptr<const Slot> published;
      if (a.decision && !a.decision->complete) {
        {
          std::lock_guard lock(mutex);
          sim = shared_sim;
          current = slot;
        }
        start = Clock::now();
        a.plan = planner.plan(sim, reference_acceleration(current->trajectory, sim.time), a.decision->waypoint, &cloud);
        refine_ms = ms_since(start);
        if (a.plan->trajectory) {
          BSpline traj = std::move(*a.plan->trajectory);
          traj.set_start_time(sim.time);
          published = std::make_shared<const Slot>(Slot{std::move(traj), 0, a.decision->yaw});
        } else if (!planner.still_safe(current->trajectory, sim.time, cloud)) {
          BSpline traj = planner.brake(sim);
          traj.set_start_time(sim.time);
          published = std::make_shared<const Slot>(Slot{std::move(traj), 0, current->desired_yaw});
        }
      }
      std::lock_guard lock(mutex);
      if (published) {
        auto next_slot = std::make_shared<Slot>(*published);
        next_slot->generation = slot->generation + 1;
        slot = std::move(next_slot);
        log.trajectories.push_back({slot->generation, slot->trajectory});
      }
      a.time = shared_sim.time;
      log.timings.perception_ms += perception_ms;
      log.timings.policy_ms += policy_ms;
      log.timings.refine_ms += refine_ms;
      const bool lost = a.lost;
      arrivals.push_back(std::move(a));
      if (lost) return;
    }
  });

  SimState sim = shared_sim;
  ExecState exec = ExecState::Idle;
  double command_yaw = scenario.start.yaw;
  for (std::int64_t k = 0;; ++k) {
    std::this_thread::sleep_until(origin + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(
                                               static_cast<double>(k) / config.control_rate)));
    const double t = static_cast<double>(k) / config.control_rate;
    sim.time = t;
    std::shared_ptr<const Slot> current;
    std::deque<Arrival> ready;
    {
      std::lock_guard lock(mutex);
      shared_sim = sim;
      current = slot;
      ready.swap(arrivals);
    }
    const auto finish = [&](Outcome outcome) {
      log.outcome = outcome;
      log.end_time = t;
      if (k % record_every == 0) rec.frame(t, sim, std::nullopt);
    };
    if (check_collision(scenario.world, sim.pose, scenario.drone_radius).collided) {
      finish(Outcome::Collision);
      break;
    }
    bool lost = false;
    for (auto& a : ready) {
      if (a.lost) {
        rec.note(t, "warning", "policy lost: " + a.error);
        lost = true;
        break;
      }
      if (!a.decision) {
        rec.note(t, "no_decision", a.error);
        continue;
      }
      rec.note(t, "decision", "", a.decision);
      if (a.decision->complete) {
        exec = rec.apply(exec, ExecEvent::Complete, t);
        continue;
      }
      if (a.decision->replan) exec = rec.apply(exec, ExecEvent::ReplanRequested, t, "policy request");
      if (a.plan) rec.note(t, "refine", describe(*a.plan));
      exec = rec.apply(exec, a.plan && a.plan->trajectory ? ExecEvent::DecisionReady : ExecEvent::RefineInfeasible, t);
    }
    if (lost) {
      finish(Outcome::PolicyLost);
      break;
    }
    if (exec == ExecState::TaskComplete) {
      finish(Outcome::Success);
      break;
    }
    const auto start = Clock::now();
    Command cmd = sample_command(current->trajectory, t - current->trajectory.start_time(), current->desired_yaw,
                                 command_yaw, scenario.limits.yaw_rate_max, dt);
    cmd.timestamp = t;
    command_yaw = cmd.yaw;
    log.commands.push_back({cmd, current->generation});
    if (k % record_every == 0) rec.frame(t, sim, log.commands.size() - 1);
    if (k >= last_tick) {
      log.outcome = Outcome::Timeout;
      log.end_time = t;
      break;
    }
    sim = step_plant(sim, cmd, dt, scenario.limits, scenario.plant);
    log.timings.control_ms += ms_since(start);
  }

  {
    std::lock_guard lock(mutex);
    stop = true;
  }
  wake.notify_all();
  producer.join();
  return log;
}

}  // namespace

EpisodeLog run_episode(const ScenarioSpec& scenario, Policy& policy, const ExecutorConfig& config) {
  validate(scenario);
  config.validate();
  return config.wall_clock ? run_wall_clock(scenario, policy, config) : run_deterministic(scenario, policy, config);
}

}  // namespace aerialnav
