"""Experiment protocols shared by the runner scripts and the acceptance
suite: generated corpora, hop-bucket task selection and the obstacle sweep."""

from __future__ import annotations

from dataclasses import dataclass

from .agent import AgentConfig, run_episode
from .metrics import BenchConfig, BenchReport, place_obstacles, run_bench, task_hops, with_obstacles
from .world import DynamicObstacle, Scenario, generate_scenario


def generated_corpus(n: int, rooms: tuple[int, int] = (5, 10), seed0: int = 0) -> list[Scenario]:
    """``n`` scenarios cycling through the room-count range."""
    lo, hi = rooms
    return [generate_scenario(lo + k % (hi - lo + 1), seed=seed0 + k) for k in range(n)]


def spread_tasks(scenarios: list[Scenario]) -> list[tuple[int, int]]:
    """One task per scenario, rotating through the rooms so goal distances
    vary across the corpus."""
    return [(i, (7 * i + 3) % len(s.tasks)) for i, s in enumerate(scenarios)]


def hop_bucket_jobs(scenarios: list[Scenario], buckets=(1, 2, 3, 4)) -> list[tuple[int, int]]:
    """For each scenario, the first task landing in each hop bucket."""
    jobs = []
    for i, s in enumerate(scenarios):
        seen = set()
        for t, instr in enumerate(s.tasks):
            h = task_hops(s, instr)
            if h in buckets and h not in seen:
                seen.add(h)
                jobs.append((i, t))
    return jobs


@dataclass
class ObstacleCase:
    scenario: Scenario
    task: int
    obstacles: list[DynamicObstacle]

    def with_count(self, k: int) -> Scenario:
        return with_obstacles(self.scenario, self.obstacles[:k])


def obstacle_cases(n: int, max_count: int = 3, rooms: tuple[int, int] = (5, 8), seed0: int = 7000,
                   max_tries: int | None = None) -> list[ObstacleCase]:
    """Scenarios whose clean full-system route has room for ``max_count``
    obstacles. Placement follows the executed clean trajectory, so each
    obstacle sits where the robot would otherwise drive."""
    lo, hi = rooms
    cases: list[ObstacleCase] = []
    k = 0
    limit = max_tries if max_tries is not None else 10 * n
    while len(cases) < n and k < limit:
        s = generate_scenario(lo + k % (hi - lo + 1), seed=seed0 + k)
        k += 1
        task = len(s.tasks) - 1
        clean = run_episode(s, task, AgentConfig(record_poses=False))
        if not clean.success:
            continue
        obs = place_obstacles(s, clean.trajectory, max_count, seed=seed0 + k, goal=clean.p_end)
        if len(obs) < max_count:
            continue
        cases.append(ObstacleCase(s, task, obs))
    return cases


def obstacle_sweep(cases: list[ObstacleCase], counts=(0, 1, 2, 3), keep_traces: bool = False,
                   **bench_kw) -> dict[str, dict[int, BenchReport]]:
    """Full system and the no-local ablation at every obstacle count."""
    out: dict[str, dict[int, BenchReport]] = {"full": {}, "no_local": {}}
    jobs = [(i, c.task) for i, c in enumerate(cases)]
    for k in counts:
        scen = [c.with_count(k) for c in cases]
        out["full"][k] = run_bench(scen, BenchConfig(**bench_kw), jobs, keep_traces=keep_traces)
        out["no_local"][k] = run_bench(scen, BenchConfig(no_local=True, **bench_kw), jobs, keep_traces=keep_traces)
    return out
