#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crossroads/config.hpp"
#include "crossroads/td3.hpp"
#include "crossroads/vehicle.hpp"

namespace crossroads::coordinator {

using config::RunConfig;
using td3::SlotState;
using vehicle::Intention;
using vehicle::PathTable;
using vehicle::VehicleRecord;

// Eq.-style queue update: I <- max(I + a - b, 0), per lane.
void queue_step(std::vector<int>& queue, const std::vector<int>& arrivals,
                const std::vector<int>& services);

// Mean squared backlog over the R*K lanes.
double lyapunov(const std::vector<int>& queue, int n_roads, int n_lanes);

struct TrafficMetrics {
  double total_passing_time = 0;  // static batch: first slot to last CCZ exit
  double avg_travel_time = 0;     // arrival to CCZ exit, served vehicles
  double throughput = 0;          // vehicles per second (b^av)
  long vehicles_arrived = 0;
  long vehicles_served = 0;
  int policy_collisions = 0;  // rollouts that needed the fallback planner
  int exec_collisions = 0;
  double sim_seconds = 0;
  std::vector<double> lyapunov_trace;  // one sample per slot
};

// One batch worth of control sequences, aligned at the slot the plan was
// issued. Slot tables include the issue-time state in row 0.
struct BatchPlan {
  std::vector<int> vehicle_ids;
  std::vector<std::vector<SlotState>> states;
  std::vector<std::shared_ptr<const vehicle::ReferencePath>> paths;
  bool from_fallback = false;
};

struct PlanRequest {
  std::vector<VehicleRecord> batch;  // RKN slots, virtual-padded
  std::vector<int> batch_ids;        // world ids, -1 for virtual entries
  std::vector<int> queue_snapshot;   // I after the promotions
  // Safe vehicles from earlier batches still inside the control zone, with
  // their projected future slot tables.
  std::vector<std::shared_ptr<const vehicle::ReferencePath>> leftover_paths;
  std::vector<std::vector<SlotState>> leftover_states;
};

class Planner {
 public:
  virtual ~Planner() = default;
  // Empty result = cannot coordinate safely this slot; the world retries.
  virtual std::optional<BatchPlan> plan(const PlanRequest& req,
                                        const RunConfig& cfg,
                                        const PathTable& table) = 0;
  virtual std::string name() const = 0;
};

// Predictive-mode TD3 planner: one policy rollout for the whole batch,
// quintic smoothing before the conflict area, safety re-verification, and a
// collision-set fallback when the learned rollout fails.
class Td3Planner : public Planner {
 public:
  explicit Td3Planner(td3::Td3Agent agent, bool smooth = true);
  std::optional<BatchPlan> plan(const PlanRequest& req, const RunConfig& cfg,
                                const PathTable& table) override;
  std::string name() const override { return "td3"; }

  int fallbacks() const { return fallbacks_; }
  const std::vector<double>& rollout_ms() const { return rollout_ms_; }

 private:
  td3::Td3Agent agent_;
  bool smooth_;
  int fallbacks_ = 0;
  std::vector<double> rollout_ms_;
};

class CsPlanner : public Planner {
 public:
  std::optional<BatchPlan> plan(const PlanRequest& req, const RunConfig& cfg,
                                const PathTable& table) override;
  std::string name() const override { return "cs"; }
};

// Per-lane batch formation: the first min(n, queue) waiting vehicles by
// position become controlled; remaining slots are virtual padding.
// waiting[lane_flat] holds indices into `world` sorted nearest-first.
struct FormedBatch {
  std::vector<VehicleRecord> batch;
  std::vector<int> batch_ids;
  int n_real = 0;
};
FormedBatch form_batch(const std::vector<std::vector<int>>& waiting_by_lane,
                       const std::vector<VehicleRecord>& records,
                       const std::vector<int>& ids, const RunConfig& cfg,
                       const PathTable& table);

struct EventSink {
  std::ostream* events = nullptr;  // t,event,road,lane,vehicle_id,x,y,v,a,phase
  std::ostream* queues = nullptr;  // t,road,lane,arrivals,services,count
};
void write_event_header(std::ostream& out);
void write_queue_header(std::ostream& out);

struct DynamicOptions {
  double duration_s = 3600;
  double arrival_rate = 0.2;  // per lane per second; <0 uses cfg value
  int initial_queue_per_lane = 0;
  // Intention assignment for arrivals/initial queue; nullopt = uniform legal.
  std::optional<Intention> fixed_intention;
  bool stop_when_served = false;  // end once everything queued has been served
  long max_slots = 0;             // 0 = duration-based
};

TrafficMetrics run_dynamic(Planner& planner, const RunConfig& cfg,
                           const DynamicOptions& opt, unsigned long seed,
                           const PathTable& table, EventSink sink = {});

// Saturated-queue service rate: M vehicles stacked per lane, no arrivals;
// throughput is vehicles served per second until the last conflict-area exit.
TrafficMetrics measure_throughput(Planner& planner, const RunConfig& cfg,
                                  int queued_per_lane, unsigned long seed,
                                  const PathTable& table,
                                  std::optional<Intention> intent = Intention::left);

}  // namespace crossroads::coordinator
