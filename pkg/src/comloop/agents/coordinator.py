"""Coordinator: runs the iteration loop that ties every agent together.

One iteration walks a fixed phase order: sample community artifacts,
analyze them, grow the idea pool, draft solutions, implement the drafts in
parallel sandboxes, grade what came back, and publish the successes into
the community so the next iteration can build on them.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..bundle.loader import CompetitionBundle
from ..community import CommunityStore, Kernel, Sample, sample_artifacts
from ..config import RunConfig
from ..errors import AgentError, ParseError
from ..gateway.backends import Gateway
from ..gateway.parsing import parse_tagged
from ..runs import RunRecord, select_best_run
from ..sandbox.budget import RunUsage
from ..sandbox.session import close_session, open_session
from .analyzer import analyze_kernels, extract_discussion_ideas, reports_digest
from .coder import CodingResult, make_monitor, run_coding_agent, solution_body
from .drafts import SolutionDraft, build_drafts, deps_for_publication
from .ideas import IdeaPool
from .proposer import brainstorm_paths, paths_digest, refine_ideas

PHASES = ("sample", "analyze", "ideate", "draft", "implement", "grade", "publish", "done")
REPORT_DIGEST_LIMIT = 10


@dataclass
class IterationState:
    """Phase cursor; transitions must follow PHASES exactly, no skips."""

    iteration: int
    phase: str = PHASES[0]

    def advance(self, to: str) -> None:
        if self.phase == PHASES[-1]:
            raise AgentError(f"iteration {self.iteration} is already done")
        expected = PHASES[PHASES.index(self.phase) + 1]
        if to != expected:
            raise AgentError(
                f"iteration {self.iteration}: cannot advance from {self.phase!r} "
                f"to {to!r}; next phase is {expected!r}"
            )
        self.phase = to


@dataclass
class IterationResult:
    iteration: int
    sampled_kernels: tuple
    sampled_discussions: tuple
    reports: tuple
    ideas_added: int
    paths: tuple
    drafts: tuple
    results: tuple  # CodingResult per draft, draft order
    published: tuple  # kernel keys, draft order
    best: Optional[RunRecord]
    warnings: tuple


@dataclass
class Orchestrator:
    bundle: CompetitionBundle
    store: CommunityStore
    gateway: Gateway
    config: RunConfig
    run_dir: Path
    guest_cmd: Optional[tuple] = None
    memory: IdeaPool = field(default_factory=IdeaPool)
    run_usage: RunUsage = field(default_factory=RunUsage)
    iteration: int = 0
    past_reports: list = field(default_factory=list)
    all_records: list = field(default_factory=list)

    def run_iteration(self) -> IterationResult:
        t = self.iteration
        config = self.config
        state = IterationState(iteration=t)
        warnings: list = []
        ask = self.gateway.for_lane("coordinator")
        snapshot = self.store.current
        task = self.bundle.spec.description

        sample: Sample = sample_artifacts(
            snapshot,
            config.sampling_policy,
            config.n_kernel_samples,
            config.n_discussion_samples,
            seed=config.derive_seed(f"sample:{t}"),
        )

        state.advance("analyze")
        reports, analyze_warnings = analyze_kernels(ask, task, sample.kernels)
        warnings.extend(analyze_warnings)
        self.past_reports.extend(reports)

        state.advance("ideate")
        candidates, idea_warnings = extract_discussion_ideas(
            ask, task, sample.discussions, iteration=t
        )
        warnings.extend(idea_warnings)
        before = len(self.memory)
        self.memory, filter_warnings = refine_ideas(
            ask, task, candidates, self.memory, iteration=t
        )
        warnings.extend(filter_warnings)
        ideas_added = len(self.memory) - before
        digest = reports_digest(self.past_reports[-REPORT_DIGEST_LIMIT:])
        paths, path_warnings = brainstorm_paths(ask, task, digest, self.memory)
        warnings.extend(path_warnings)

        state.advance("draft")
        drafts, draft_warnings = self._draft(ask, task, paths, snapshot, t)
        warnings.extend(draft_warnings)

        state.advance("implement")
        results = self._implement(drafts, t)
        records = [result.record for result in results]
        self.all_records.extend(records)
        for result in results:
            if result.report is not None:
                self.past_reports.append(result.report)

        state.advance("grade")
        best: Optional[RunRecord] = None
        if any(r.success for r in records):
            best = select_best_run(records, self.bundle.metric.direction)

        state.advance("publish")
        published = self._publish(drafts, results, snapshot, t)

        state.advance("done")
        self.iteration += 1
        return IterationResult(
            iteration=t,
            sampled_kernels=tuple(k.key for k in sample.kernels),
            sampled_discussions=tuple(d.key for d in sample.discussions),
            reports=tuple(reports),
            ideas_added=ideas_added,
            paths=tuple(tuple(p) for p in paths),
            drafts=drafts,
            results=tuple(results),
            published=published,
            best=best,
            warnings=tuple(warnings),
        )

    def _draft(self, ask, task: str, paths, snapshot, t: int) -> tuple:
        warnings: list = []
        context = {
            "task_description": task,
            "solution_paths": paths_digest(paths),
            "ideas_digest": self.memory.digest(),
            "n_drafts": self.config.drafts_per_iteration,
        }
        bodies = None
        for attempt in range(2):  # one re-ask
            response = ask("coordinator_drafts", context)
            try:
                bodies = parse_tagged("draft_list", response)
                break
            except ParseError as exc:
                warnings.append(f"draft synthesis unparseable (attempt {attempt + 1}): {exc}")
        if bodies is None:
            raise AgentError("coordinator produced no parseable drafts in two attempts")
        if len(bodies) != self.config.drafts_per_iteration:
            warnings.append(
                f"asked for {self.config.drafts_per_iteration} drafts, got {len(bodies)}"
            )
        drafts, build_warnings = build_drafts(bodies, snapshot, iteration=t)
        warnings.extend(build_warnings)
        return drafts, warnings

    def _implement(self, drafts: tuple, t: int) -> list:
        config = self.config
        deterministic = config.is_deterministic

        def work(index: int, draft: SolutionDraft) -> CodingResult:
            lane = f"agent_t{t}_d{index}"
            lane_ask = self.gateway.for_lane(lane)
            workspace = Path(self.run_dir) / "sessions" / f"t{t}_d{index}"
            session = open_session(
                str(workspace),
                input_mounts={"data": str(self.bundle.public_dir)},
                budget=config.budget(),
                guest_cmd=self.guest_cmd,
                run_usage=self.run_usage,
                session_id=f"t{t}_d{index}",
                deterministic=deterministic,
            )
            try:
                monitor = None if deterministic else make_monitor(lane_ask)
                return run_coding_agent(
                    lane_ask,
                    session,
                    self.bundle,
                    draft,
                    iteration=t,
                    max_steps=config.max_steps,
                    monitor=monitor,
                    poll_interval=config.poll_interval,
                    deterministic=deterministic,
                )
            finally:
                close_session(session)

        with concurrent.futures.ThreadPoolExecutor(max_workers=config.n_parallel) as pool:
            futures = [pool.submit(work, i, draft) for i, draft in enumerate(drafts)]
            return [future.result() for future in futures]

    def _publish(self, drafts: tuple, results: list, snapshot, t: int) -> tuple:
        published: list = []
        deadline = self.bundle.spec.deadline
        for draft, result in zip(drafts, results):
            record = result.record
            if not record.success:
                continue
            body = solution_body(result.cells)
            produced = tuple(
                name for name in (record.validation_file, record.submission_file) if name
            )
            kernel = Kernel(
                key=record.run_id,
                author_tier="none",
                votes=0,
                published_at=deadline + (t + 1),
                body=body,
                produced_files=produced,
            )
            deps = deps_for_publication(draft, snapshot)
            self.store.publish(kernel, deps=deps, score=record.validation_score)
            published.append(kernel.key)
        return tuple(published)
