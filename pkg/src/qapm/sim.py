"""Deterministic control/scheduling co-simulation engine.

One event loop drives everything: job releases (sample + control output +
power-policy invocation), preemptive EDF dispatch, speed-scaled execution
accounting, job completions (actuation), reference steps, and trace
sampling.  Between consecutive events every plant integrates its dynamics
with the held actuator value, and the running job consumes nominal work at
the current speed.

Time is integer microsecond ticks.  Event order at equal ticks is fixed:
completions, then reference steps, then releases, then trace samples, then
task id, then push order.  A completing job therefore actuates before a
same-tick release samples the plant, and releases see the new reference.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .kernels import BACKEND
from .metrics import EnergyAccumulator, IaeAccumulator, RunReport, TraceRecorder
from .pid import Pid
from .plant import ReferenceSignal, tf_to_state_space
from .policy import (
    PolicyDecision,
    SchedulabilityError,
    adapt_period,
    ideal_speed,
    policy_step,
    quantize_speed,
)
from .scenario import Scenario

__all__ = ["Job", "SimResult", "Simulator", "run_loop", "edf_select"]

# Event kind priorities; lower runs first at an equal tick.
PRI_COMPLETION = 0
PRI_REF_STEP = 1
PRI_RELEASE = 2
PRI_TRACE = 3

# A completion may round down to the previous tick, leaving at most one
# tick of service unconsumed; anything larger is an accounting bug.
_RESIDUE_TICKS = 2.5


class Job:
    """One released instance of a control task."""

    __slots__ = (
        "task_id", "index", "release", "deadline", "remaining", "u",
        "completion", "missed", "token", "sched_alpha",
    )

    def __init__(self, task_id, index, release, deadline, work, u):
        self.task_id = task_id
        self.index = index
        self.release = release          # ticks
        self.deadline = deadline        # ticks, absolute
        self.remaining = work           # nominal seconds at alpha = 1
        self.u = u                      # control output, applied at completion
        self.completion = None          # ticks, set when done
        self.missed = False
        self.token = 0                  # invalidates stale completion events
        self.sched_alpha = None         # speed the pending completion assumed


def edf_select(ready):
    """Job with the earliest absolute deadline; ties by release, then task id."""
    best = None
    for job in ready:
        if best is None or (job.deadline, job.release, job.task_id) < (
                best.deadline, best.release, best.task_id):
            best = job
    return best


class _LoopRuntime:
    __slots__ = (
        "task", "plant", "pid", "eff_period", "last_release",
        "release_count", "current_work", "period_series",
    )

    def __init__(self, task, plant, pid):
        self.task = task
        self.plant = plant
        self.pid = pid
        self.eff_period = task.h0       # seconds; governs this loop's next release
        self.last_release = None        # ticks
        self.release_count = 0
        self.current_work = task.c_nom  # last drawn execution time (jitter hook)
        self.period_series = []         # (tick, eff_period_s, period_ticks)


@dataclass
class SimResult:
    report: RunReport
    trace: TraceRecorder
    jobs: list = field(default_factory=list)
    segments: list = field(default_factory=list)  # (start_tick, end_tick, task_id)
    busy_ticks: int = 0
    idle_ticks: int = 0


class Simulator:
    """Runs one scenario to completion; never reused across runs."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.end_tick = round(sc.duration_s * 1e6)
        self.loops = [
            _LoopRuntime(
                lp.task,
                tf_to_state_space(lp.plant, sc.micro_step_us,
                                  label=f"loop {lp.task.id}"),
                Pid(lp.gains),
            )
            for lp in sc.loops
        ]
        self.by_id = {lr.task.id: lr for lr in self.loops}
        self.specs = [lr.task for lr in self.loops]
        self.index_of = {lr.task.id: i for i, lr in enumerate(self.loops)}
        self.base_periods = [t.h0 for t in self.specs]
        self.ref = ReferenceSignal(interval_s=sc.perturbation_s)
        self.r = 0.0
        self.rng = random.Random(sc.seed)

        self.now = 0
        self.heap = []
        self._seq = 0
        self.ready: list[Job] = []
        self.running: Job | None = None
        self.blocked_until = 0
        self.guard: set[Job] | None = None
        self.pending_alpha = 1.0
        self.seg_start = 0

        self.energy = EnergyAccumulator(alpha0=1.0)
        self.iae = IaeAccumulator([t.id for t in self.specs])
        self.trace = TraceRecorder()
        self.utilization: list[tuple[int, float, float]] = []
        self.jobs: list[Job] = []
        self.segments: list[tuple[int, int, int]] = []
        self.busy_ticks = 0
        self.idle_ticks = 0
        self.misses = 0

    # -- event plumbing ------------------------------------------------

    def _push(self, tick, pri, task_id, payload=0):
        self._seq += 1
        heapq.heappush(self.heap, (tick, pri, task_id, self._seq, payload))

    def _seed_events(self):
        for lr in self.loops:
            self._push(0, PRI_RELEASE, lr.task.id)
        step = round(self.sc.perturbation_s * 1e6)
        k = 0
        while k * step < self.end_tick:  # no step at the final instant
            self._push(k * step, PRI_REF_STEP, 0, payload=k)
            k += 1
        cadence = round(self.sc.trace_cadence_ms * 1000)
        k = 0
        while k * cadence <= self.end_tick:
            self._push(k * cadence, PRI_TRACE, 0)
            k += 1

    # -- time advance ----------------------------------------------------

    def _advance_to(self, tick):
        span = tick - self.now
        if span < 0:
            raise RuntimeError(f"event order violation: {tick} < {self.now}")
        if span == 0:
            return
        r = self.r
        for lr in self.loops:
            self.iae.add(lr.task.id, lr.plant.integrate(span, r))
        job = self.running
        if job is not None:
            run_from = max(self.now, self.blocked_until)
            if run_from < tick:
                job.remaining -= (tick - run_from) * 1e-6 * self.energy.alpha
                if job.remaining < 0.0:
                    job.remaining = 0.0
            self.busy_ticks += span
        else:
            self.idle_ticks += span
        self.now = tick

    def _check_deadlines(self):
        for job in self.ready:
            if not job.missed and job.deadline < self.now and job.remaining > 0.0:
                job.missed = True
                self.misses += 1

    # -- policy ----------------------------------------------------------

    def _invoke_policy(self, trigger_id: int, error: float):
        sc = self.sc
        work = [lr.current_work for lr in self.loops]
        idx = self.index_of[trigger_id]
        if sc.mode == "qapm":
            try:
                dec = policy_step(self.specs, idx, error, self.base_periods,
                                  sc.cpu, work=work)
            except SchedulabilityError:
                # Demand exceeds capacity (only reachable with execution
                # time jitter or deliberately infeasible sets): saturate at
                # full speed, skip reclaiming, let deadline misses surface.
                base = list(self.base_periods)
                base[idx] = adapt_period(error, self.specs[idx])
                ai = ideal_speed(zip(work, base))
                dec = PolicyDecision(
                    alpha_ideal=ai, alpha=1.0, u_expected=ai,
                    base_periods=tuple(base), effective_periods=tuple(base),
                )
            self.base_periods = list(dec.base_periods)
            for lr, h in zip(self.loops, dec.effective_periods):
                lr.eff_period = h
            alpha_ideal, alpha = dec.alpha_ideal, dec.alpha
        elif sc.mode == "osdvs":
            alpha_ideal = ideal_speed(zip(work, (t.h0 for t in self.specs)))
            alpha = min(alpha_ideal, 1.0)
        else:  # dvs-only
            alpha_ideal = ideal_speed(zip(work, (t.h0 for t in self.specs)))
            try:
                alpha = quantize_speed(alpha_ideal, sc.cpu)
            except SchedulabilityError:
                alpha = 1.0
        self.utilization.append((self.now, alpha_ideal, alpha))
        self._request_alpha(alpha)

    def _request_alpha(self, alpha: float):
        # Speed increases take effect at once.  A decrease is held until
        # every job in flight at decision time has completed: those jobs'
        # deadlines were budgeted at the old speed, and the reclaimed
        # schedule runs at full utilization with no slack to absorb the
        # longer service a mid-job slowdown would cause.
        if alpha >= self.energy.alpha:
            self.guard = None
            self._apply_alpha(alpha)
            return
        if self.guard is None:
            in_flight = {j for j in self.ready if j.remaining > 0.0}
            if not in_flight:
                self._apply_alpha(alpha)
                return
            self.guard = in_flight
        self.pending_alpha = alpha

    def _apply_alpha(self, alpha: float):
        self.pending_alpha = None
        if self.energy.set_alpha(self.now, alpha):
            if self.sc.switch_overhead_us:
                self.blocked_until = max(self.blocked_until,
                                         self.now + self.sc.switch_overhead_us)
            if self.running is not None:
                # Pending completion assumed the old speed.
                self.running.sched_alpha = None

    # -- event handlers ----------------------------------------------------

    def _on_release(self, task_id: int):
        lr = self.by_id[task_id]
        y = lr.plant.sample()
        e = self.r - y
        lr.last_release = self.now

        work = lr.task.c_nom
        if self.sc.c_jitter > 0.0:
            work *= 1.0 + self.sc.c_jitter * (2.0 * self.rng.random() - 1.0)
        lr.current_work = work

        self._invoke_policy(task_id, abs(e))
        # The manager re-decides the period before the control computation
        # runs, so the controller sees the period now in force.
        u = lr.pid.compute(e, lr.eff_period)

        period_ticks = int(lr.eff_period * 1e6 + 0.5)  # half-up to the tick grid
        job = Job(task_id, lr.release_count, self.now, self.now + period_ticks,
                  work, u)
        lr.release_count += 1
        lr.period_series.append((self.now, lr.eff_period, period_ticks))
        self.ready.append(job)
        self.jobs.append(job)
        self._push(self.now + period_ticks, PRI_RELEASE, task_id)

    def _on_completion(self, ev_job: "Job", token: int):
        job = self.running
        if job is not ev_job or job.token != token:
            return  # stale event from before a preemption or speed change
        task_id = job.task_id
        residue_limit = self.energy.alpha * _RESIDUE_TICKS * 1e-6 + 1e-12
        if job.remaining > residue_limit:
            raise RuntimeError(
                f"task {task_id}: completion fired with {job.remaining!r}s left"
            )
        job.remaining = 0.0
        job.completion = self.now
        if not job.missed and self.now > job.deadline:
            job.missed = True
            self.misses += 1
        self.ready.remove(job)
        if self.guard is not None:
            self.guard.discard(job)
            if not self.guard:
                self.guard = None
                self._apply_alpha(self.pending_alpha)
        self.by_id[task_id].plant.actuate(job.u)

    def _on_trace(self):
        t_s = self.now * 1e-6
        alpha = self.energy.alpha
        e_inst = alpha * alpha
        for lr in self.loops:
            y = lr.plant.sample()
            self.trace.add(t_s, lr.task.id, self.r, y, self.r - y, lr.plant.u,
                           lr.eff_period * 1000.0, alpha, e_inst)

    # -- dispatch ----------------------------------------------------------

    def _dispatch(self):
        job = edf_select(self.ready)
        if job is not self.running:
            if self.running is not None:
                self.running.token += 1  # cancel its pending completion
                if self.seg_start < self.now:
                    self.segments.append(
                        (self.seg_start, self.now, self.running.task_id))
            self.running = job
            self.seg_start = self.now
            if job is not None:
                self._schedule_completion(job)
        elif job is not None and job.sched_alpha != self.energy.alpha:
            job.token += 1
            self._schedule_completion(job)

    def _schedule_completion(self, job: Job):
        alpha = self.energy.alpha
        base = max(self.now, self.blocked_until)
        ticks = int(job.remaining / alpha * 1e6)  # floor; sub-tick residue forgiven
        job.token += 1
        job.sched_alpha = alpha
        self._push(base + ticks, PRI_COMPLETION, job.task_id, payload=(job, job.token))

    # -- main loop -----------------------------------------------------------

    def run(self) -> SimResult:
        if self.end_tick == 0:
            return self._finalize()
        self._seed_events()
        heap = self.heap
        while heap and heap[0][0] <= self.end_tick:
            tick = heap[0][0]
            if tick > self.now:
                self._advance_to(tick)
                self._check_deadlines()
            tick, pri, task_id, _seq, payload = heapq.heappop(heap)
            if pri == PRI_COMPLETION:
                self._on_completion(payload[0], payload[1])
            elif pri == PRI_REF_STEP:
                self.r = self.ref.amplitude if payload % 2 == 0 else 0.0
            elif pri == PRI_RELEASE:
                self._on_release(task_id)
            else:
                self._on_trace()
            self._dispatch()
        if self.now < self.end_tick:
            self._advance_to(self.end_tick)
            self._check_deadlines()
        return self._finalize()

    def _finalize(self) -> SimResult:
        if self.running is not None and self.seg_start < self.now:
            self.segments.append((self.seg_start, self.now, self.running.task_id))
        integral = self.energy.finalize(self.end_tick)
        duration_s = self.end_tick * 1e-6
        period_stats = {}
        for lr in self.loops:
            series = lr.period_series
            if series:
                ms = [h * 1000.0 for _, h, _ in series]
                period_stats[lr.task.id] = {
                    "min": min(ms), "max": max(ms),
                    "mean": sum(ms) / len(ms), "count": len(ms),
                }
            else:
                period_stats[lr.task.id] = {
                    "min": 0.0, "max": 0.0, "mean": 0.0, "count": 0,
                }
        report = RunReport(
            scenario=self.sc.name,
            mode=self.sc.mode,
            cpu=self.sc.cpu.name or "custom",
            duration_s=duration_s,
            seed=self.sc.seed,
            backend=BACKEND,
            j=dict(self.iae.j),
            j_sum=self.iae.j_sum,
            e_avg=(integral / duration_s) if duration_s > 0 else None,
            energy_integral=integral,
            misses=self.misses,
            period_stats_ms=period_stats,
            utilization=[(t * 1e-6, ai, a) for t, ai, a in self.utilization],
            speed_changes=list(self.energy.changes),
        )
        return SimResult(
            report=report,
            trace=self.trace,
            jobs=self.jobs,
            segments=self.segments,
            busy_ticks=self.busy_ticks,
            idle_ticks=self.idle_ticks,
        )


def run_loop(sc: Scenario) -> SimResult:
    """Run one scenario start to finish."""
    return Simulator(sc).run()
