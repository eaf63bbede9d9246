"""Command-line front end.

Five subcommands cover the workflow: ``fom`` builds or ingests a
full-order system, ``impulse`` runs the impulse-response sampling
experiment, ``train`` identifies reduced models from the samples,
``predict`` simulates models against the full system under a forcing
signal, and ``sweep`` grids the sampling parameters.

Every invocation creates one run directory (timestamp + config hash)
under ``--out``, prints its path as the only stdout line, and finishes
by atomically writing ``manifest.json`` — config echo, version, phase
timings, diagnostics, and a checksum inventory of every produced file.
Exit codes: 0 success (including reported model divergence), 1
configuration, 2 data, 3 numerical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__, era
from . import io as matio
from .errors import ConfigurationError, DivergenceError, RomkitError
from .lti import (
    BalancedROM,
    ContinuousLTI,
    DiscreteLTI,
    Trajectory,
    discretize_exact,
    eigenvalues,
    simulate_discrete,
    simulate_rk3,
)
from .projection import (
    build_galerkin,
    build_lspg,
    relative_error,
    simulate_galerkin,
    simulate_lspg,
)
from .scalability import (
    DDRom,
    OutputPartition,
    PartitionBlock,
    fit_tangential,
    project_markov,
    recover_rom,
)
from .snapshots import SnapshotMatrix, pod, pod_blockwise
from .testbed import (
    InputSignal,
    SyntheticFomSpec,
    build_synthetic_fom,
    load_external_system,
    sample_impulse_continuous,
)

_SUMMARY_COLUMNS = (
    "model", "status", "divergence_step", "step", "samples",
    "spectral_radius", "stable", "max_error", "median_error",
    "final_error", "first_quartile_median", "last_quartile_median",
    "message",
)


# ---------------------------------------------------------------------------
# run plumbing


@dataclass(frozen=True)
class RunConfig:
    """Validated, JSON-serializable echo of one invocation."""

    command: str
    options: dict

    def digest(self):
        payload = json.dumps({"command": self.command, **self.options},
                             sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:8]

    def as_dict(self):
        return {"command": self.command, **self.options}


@dataclass
class RunManifest:
    """Accumulates what a run produced; written atomically last."""

    config: RunConfig
    timings: dict = field(default_factory=dict)
    hsv: object = None
    eigen: object = None
    extra: dict = field(default_factory=dict)

    def finalize(self, run_dir):
        run_dir = Path(run_dir)
        files = {}
        for path in sorted(run_dir.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                files[path.relative_to(run_dir).as_posix()] = \
                    matio.sha256_file(path)
        matio.write_json(run_dir / "manifest.json", {
            "config": self.config.as_dict(),
            "version": __version__,
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
            "hsv": self.hsv,
            "eigen": self.eigen,
            "extra": self.extra,
            "files": files,
        })


@contextmanager
def _phase(timings, name):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = timings.get(name, 0.0) \
            + time.perf_counter() - start


def _config_from(args):
    options = {k: v for k, v in vars(args).items()
               if k not in ("func", "command") and not k.startswith("_")}
    return RunConfig(command=args.command, options=options)


def _open_run_dir(out, config):
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = Path(out) / ("%s-%s" % (stamp, config.digest()))
    run_dir = base
    suffix = 0
    while True:
        try:
            run_dir.mkdir(parents=True, exist_ok=False)
            return run_dir
        except FileExistsError:
            suffix += 1
            run_dir = base.with_name("%s-%d" % (base.name, suffix))


# ---------------------------------------------------------------------------
# shared helpers


def _integer_step_ratio(coarse, fine, what):
    m = coarse / fine
    ratio = int(round(m))
    if ratio < 1 or abs(m - ratio) > 1e-9 * max(abs(m), 1.0):
        raise ConfigurationError(
            "%s: %g is not a positive integer multiple of %g"
            % (what, coarse, fine))
    return ratio


def _parse_int_list(text, flag):
    try:
        values = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError("%s: %s" % (flag, exc)) from exc
    if not values:
        raise ConfigurationError("%s must list at least one value" % flag)
    return values


def _parse_float_list(text, flag):
    try:
        values = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError("%s: %s" % (flag, exc)) from exc
    if not values:
        raise ConfigurationError("%s must list at least one value" % flag)
    return values


def _make_signal(args):
    kind = args.signal
    if kind == "impulse":
        return InputSignal.unit_impulse()
    if kind == "sinusoid":
        if args.amplitude is None or args.frequency is None:
            raise ConfigurationError("sinusoid needs --amplitude and "
                                     "--frequency")
        return InputSignal.sinusoid(args.amplitude, args.frequency)
    if kind == "gaussian":
        if args.mean is None or args.std is None:
            raise ConfigurationError("gaussian needs --mean and --std")
        return InputSignal.gaussian_pulse(args.mean, args.std)
    if args.signal_file is None:
        raise ConfigurationError("samples signal needs --signal-file")
    return InputSignal.from_samples(matio.read_matrix(args.signal_file)
                                    .ravel())


def _signal_on_grid(sig, ratio):
    """Restride a sample-table signal onto a grid ``ratio`` times
    coarser; analytic signals render exactly on any grid."""
    if ratio == 1 or sig.kind != "samples":
        return sig
    return InputSignal.from_samples(np.asarray(sig.values)[::ratio])


def _resolve_dt(sys, dt, context):
    if isinstance(sys, DiscreteLTI):
        if dt is not None and abs(dt - sys.step) > 1e-12 * sys.step:
            raise ConfigurationError(
                "%s: --dt %g conflicts with the system step %g"
                % (context, dt, sys.step))
        return sys.step
    if dt is None or dt <= 0:
        raise ConfigurationError("%s: a continuous system needs --dt > 0"
                                 % context)
    return dt


def _eigen_report(obj):
    eigs, measure = eigenvalues(obj)
    continuous = isinstance(obj, ContinuousLTI) or (
        isinstance(obj, BalancedROM) and obj.step is None)
    if continuous:
        return {"spectral_abscissa": measure, "stable": bool(measure < 0)}
    return {"spectral_radius": measure, "stable": bool(measure < 1)}


def _simulate_fom(sys, sig, dt, t_final):
    if isinstance(sys, DiscreteLTI):
        n_steps = int(round(t_final / sys.step))
        if n_steps < 1:
            raise ConfigurationError("t_final shorter than one system step")
        return simulate_discrete(sys, sig, n_steps)
    return simulate_rk3(sys, sig, dt, t_final, np.zeros(sys.n))


def _error_stats(err):
    finite = err[np.isfinite(err)]
    quarter = max(len(err) // 4, 1)
    head = err[:quarter]
    tail = err[len(err) - quarter:]

    def med(values):
        values = values[np.isfinite(values)]
        return float(np.median(values)) if values.size else None

    return {
        "max_error": float(finite.max()) if finite.size else None,
        "median_error": med(err),
        "final_error": float(finite[-1]) if finite.size else None,
        "first_quartile_median": med(head),
        "last_quartile_median": med(tail),
    }


def _evaluate_model(label, simulate, fom_traj, ratio, exclude_tail_cells,
                    blocks, compare="outputs"):
    """Run one model, compare it to the full trajectory on the model's
    grid, and return (summary_row, trajectory, error_series)."""
    entry = {k: None for k in _SUMMARY_COLUMNS}
    entry.update(model=label, status="ok")
    try:
        traj = simulate()
    except DivergenceError as exc:
        entry.update(status="diverged", divergence_step=exc.step_index,
                     message=str(exc))
        return entry, None, None
    count = len(traj)
    reference = fom_traj.outputs if compare == "outputs" else fom_traj.states
    if (len(fom_traj) - 1) // ratio + 1 < count:
        raise ConfigurationError(
            "model %r grid extends past the full trajectory" % label)
    sub = Trajectory(times=fom_traj.times[::ratio][:count],
                     states=fom_traj.states[::ratio][:count],
                     outputs=reference[::ratio][:count])
    err = relative_error(sub, traj,
                         exclude_tail_cells=exclude_tail_cells,
                         variable_blocks=blocks)
    entry.update(step=traj.step, samples=count, **_error_stats(err))
    return entry, traj, err


def _equal_output_blocks(q, variables, context):
    if variables <= 1:
        return None
    if q % variables:
        raise ConfigurationError(
            "%s: %d outputs do not split into %d equal variable blocks"
            % (context, q, variables))
    size = q // variables
    return tuple(("var%d" % i, (i * size, (i + 1) * size))
                 for i in range(variables))


def _write_errors_csv(path, series):
    lines = ["time,series,value"]
    for label, times, err in series:
        for t, e in zip(times, err):
            lines.append("%.17g,%s,%.17g" % (t, label, e))
    matio.atomic_write_text(path, "\n".join(lines) + "\n")


def _write_summary(directory, rows):
    matio.write_json(directory / "summary.json", {"models": rows})
    lines = [",".join(_SUMMARY_COLUMNS)]
    for row in rows:
        cells = []
        for col in _SUMMARY_COLUMNS:
            value = row.get(col)
            if value is None:
                cells.append("")
            elif isinstance(value, float):
                cells.append("%.17g" % value)
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    matio.atomic_write_text(directory / "summary.csv",
                            "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# fom


def cmd_fom(args):
    if bool(args.synthetic) == bool(args.load):
        raise ConfigurationError("choose exactly one of --synthetic and "
                                 "--load A B C")
    config = _config_from(args)
    run_dir = _open_run_dir(args.out, config)
    manifest = RunManifest(config=config)

    with _phase(manifest.timings, "build"):
        if args.synthetic:
            if args.cells is None:
                raise ConfigurationError("--synthetic needs --cells")
            spec = SyntheticFomSpec(
                cells=args.cells, advection_speed=args.advection,
                diffusivity=args.diffusivity, stiffness=args.stiffness,
                dx=args.dx, variable_count=args.variables,
                boundary_input=args.input_cell)
            sys_ = build_synthetic_fom(spec)
        else:
            descriptor = (args.descriptor if args.descriptor
                          else {"kind": args.kind, "step": args.step})
            sys_ = load_external_system(args.load[0], args.load[1],
                                        args.load[2], descriptor)
        if args.discretize is not None:
            if isinstance(sys_, DiscreteLTI):
                raise ConfigurationError("--discretize applies to "
                                         "continuous systems only")
            sys_ = discretize_exact(sys_, args.discretize)

    eigen = _eigen_report(sys_)
    with _phase(manifest.timings, "export"):
        matio.save_system(run_dir / "system", sys_)
        diagnostics = dict(eigen)
        diagnostics.update(
            kind="discrete" if isinstance(sys_, DiscreteLTI)
            else "continuous",
            n=sys_.n, p=sys_.p, q=sys_.q,
            condition=float(np.linalg.cond(sys_.a_matrix)))
        matio.write_json(run_dir / "diagnostics.json", diagnostics)
    manifest.eigen = eigen
    manifest.extra = {"n": sys_.n, "p": sys_.p, "q": sys_.q,
                      "condition": diagnostics["condition"]}
    manifest.finalize(run_dir)
    return run_dir


# ---------------------------------------------------------------------------
# impulse


def _impulse_discrete_states(sys_, ratio, count):
    """Discrete impulse sampling that also records the sampled states
    (single-input only; mirrors the recurrence of the plain sampler)."""
    if sys_.p != 1:
        raise ConfigurationError("--keep-states supports single-input "
                                 "systems only")
    a = sys_.a_matrix
    x = sys_.b_matrix[:, 0].copy()
    states = np.empty((sys_.n, count))
    samples = np.empty((count, sys_.q, 1))
    for k in range(count):
        if k:
            for _ in range(ratio):
                x = a @ x
        states[:, k] = x
        samples[k, :, 0] = sys_.c_matrix @ x
    seq = era.MarkovSequence(samples=samples,
                             sample_period=ratio * sys_.step)
    return seq, states


def cmd_impulse(args):
    if args.count < 2:
        raise ConfigurationError("--count must be at least 2")
    if args.period is not None and args.period_steps is not None:
        raise ConfigurationError("give --period or --period-steps, "
                                 "not both")
    config = _config_from(args)
    sys_ = matio.load_system(args.system)
    dt = _resolve_dt(sys_, args.dt, "impulse")
    if args.period is not None:
        ratio = _integer_step_ratio(args.period, dt, "--period")
    else:
        ratio = args.period_steps if args.period_steps is not None else 1
        if ratio < 1:
            raise ConfigurationError("--period-steps must be >= 1")
    sample_period = ratio * dt

    run_dir = _open_run_dir(args.out, config)
    manifest = RunManifest(config=config)
    states = None
    with _phase(manifest.timings, "sampling"):
        if isinstance(sys_, DiscreteLTI):
            if args.keep_states:
                seq, states = _impulse_discrete_states(sys_, ratio,
                                                       args.count)
            else:
                seq = era.sample_impulse(sys_, sample_period, args.count)
        else:
            result = sample_impulse_continuous(
                sys_, dt, ratio, args.count,
                keep_states=args.keep_states)
            seq, states = result if args.keep_states else (result, None)

    with _phase(manifest.timings, "export"):
        matio.write_markov(run_dir / "markov.dmat", seq)
        if states is not None:
            matio.write_snapshots(
                run_dir / "states.dmat",
                SnapshotMatrix(data=states, step=sample_period))
    manifest.eigen = _eigen_report(sys_)
    manifest.extra = {"sample_period": sample_period, "ratio": ratio,
                      "count": args.count, "dt": dt}
    manifest.finalize(run_dir)
    return run_dir


# ---------------------------------------------------------------------------
# train


def _rank_energy(rank, energy):
    if rank is not None and energy is not None:
        raise ConfigurationError("give --rank or --energy, not both")
    return rank, energy


def _captured_energy(hankel, retained):
    total = np.linalg.svd(hankel, compute_uv=False).sum()
    return float(np.sum(retained) / total) if total > 0 else None


def _auto_tangential_ranks(seq, energy=era.DEFAULT_ENERGY):
    """Smallest direction counts capturing the energy threshold of the
    stacked sample matrices (Frobenius convention)."""
    q_l = seq.samples.transpose(1, 0, 2).reshape(seq.q, -1)
    q_r = seq.samples.reshape(-1, seq.p)

    def pick(matrix):
        sv = np.linalg.svd(matrix, compute_uv=False)
        weights = sv ** 2
        total = weights.sum()
        if total <= 0:
            return 1
        fractions = np.cumsum(weights) / total
        return int(np.searchsorted(fractions, energy - 1e-15) + 1)

    return pick(q_l), pick(q_r)


def _resolve_tangential(seq, spec_text):
    """Return (l1, l2, skipped).  ``auto`` picks energy-based ranks and
    skips the projection when it would not shrink the problem."""
    if spec_text == "auto":
        l1, l2 = _auto_tangential_ranks(seq)
        if l1 >= 0.8 * seq.q and l2 >= 0.8 * seq.p:
            return l1, l2, True
        return l1, l2, False
    values = _parse_int_list(spec_text, "--tangential")
    if len(values) != 2:
        raise ConfigurationError("--tangential takes 'auto' or 'L1,L2'")
    return values[0], values[1], False


def _train_block(seq, rank, energy, m_o, m_p, memory_limit, tangential,
                 timings):
    """Shared identification pipeline: optional tangential projection,
    Hankel assembly, SVD, realization.  Returns (rom, projection, info).
    """
    proj = None
    work = seq
    if tangential is not None:
        l1, l2, skipped = _resolve_tangential(seq, tangential)
        if not skipped:
            with _phase(timings, "tangential"):
                proj = fit_tangential(seq, l1, l2)
                work = project_markov(seq, proj)
    with _phase(timings, "hankel"):
        pair = era.build_hankel(work, m_o=m_o, m_p=m_p,
                                memory_limit=memory_limit)
    with _phase(timings, "svd"):
        triple = era.hankel_svd(pair, rank=rank, energy=energy)
        captured = _captured_energy(pair.hankel, triple[1])
    with _phase(timings, "rom_build"):
        rom = era.era_rom(pair, triple, work.sample_period)
        if proj is not None:
            rom = recover_rom(rom, proj)
    info = {"selected_rank": rom.order, "captured_energy": captured,
            "m_o": pair.m_o, "m_p": pair.m_p,
            "tangential": None if proj is None else
            {"l1": proj.l1, "l2": proj.l2,
             "retained_energies": list(proj.retained_energies)}}
    return rom, proj, pair, triple, info


def _load_partition_blocks(path, seq):
    spec = matio.read_descriptor(path)
    raw_blocks = spec.get("blocks")
    if not raw_blocks:
        raise ConfigurationError("partition file must list blocks")
    blocks = []
    sources = []
    for raw in raw_blocks:
        try:
            name = raw["name"]
            start, stop = int(raw["start"]), int(raw["stop"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError("partition blocks need name, start, "
                                     "stop: %s" % exc) from exc
        steps = int(raw.get("period_steps", 1))
        if steps < 1:
            raise ConfigurationError("block %r period_steps must be >= 1"
                                     % name)
        blocks.append(PartitionBlock(
            name=name, start=start, stop=stop,
            sample_period=steps * seq.sample_period,
            rank=raw.get("rank"), energy=raw.get("energy")))
        sub = seq.samples[::steps, start:stop, :]
        if sub.shape[0] < 2:
            raise ConfigurationError(
                "block %r keeps %d samples after striding; need >= 2"
                % (name, sub.shape[0]))
        sources.append(era.MarkovSequence(
            samples=sub.copy(), sample_period=steps * seq.sample_period))
    partition = OutputPartition(blocks=tuple(blocks),
                                base_period=seq.sample_period)
    return partition, sources


def cmd_train(args):
    rank, energy = _rank_energy(args.rank, args.energy)
    if args.modes and args.partition:
        raise ConfigurationError("--modes applies to monolithic training "
                                 "only")
    if args.modes and not args.states:
        raise ConfigurationError("--modes needs --states from the impulse "
                                 "run")
    config = _config_from(args)
    memory_limit = (args.memory_limit if args.memory_limit
                    else era.DEFAULT_MEMORY_LIMIT)

    seq = matio.read_markov(args.markov)
    run_dir = _open_run_dir(args.out, config)
    manifest = RunManifest(config=config)

    if args.partition:
        partition, sources = _load_partition_blocks(args.partition, seq)
        block_roms = []
        hsv = {}
        eigen = {}
        extra_blocks = {}
        for src, blk in zip(sources, partition.blocks):
            if blk.rank is not None:
                blk_rank, blk_energy = blk.rank, None
            elif blk.energy is not None:
                blk_rank, blk_energy = None, blk.energy
            else:
                blk_rank, blk_energy = rank, energy
            rom, proj, _, _, info = _train_block(
                src, blk_rank, blk_energy, args.mo, args.mp, memory_limit,
                args.tangential, manifest.timings)
            block_roms.append(rom)
            hsv[blk.name] = [float(v) for v in rom.hsv]
            eigen[blk.name] = _eigen_report(rom)
            extra_blocks[blk.name] = info
            with _phase(manifest.timings, "export"):
                matio.save_rom(run_dir / ("rom_%s" % blk.name), rom)
                if proj is not None:
                    tdir = run_dir / ("tangential_%s" % blk.name)
                    tdir.mkdir(exist_ok=True)
                    matio.write_dmat(tdir / "left.dmat", proj.left_basis)
                    matio.write_dmat(tdir / "right.dmat", proj.right_basis)
                    matio.write_json(tdir / "projection.json", {
                        "l1": proj.l1, "l2": proj.l2,
                        "retained_energies":
                            list(proj.retained_energies)})
        dd = DDRom(block_roms=tuple(block_roms), partition=partition)
        with _phase(manifest.timings, "export"):
            matio.write_json(run_dir / "partition.json", {
                "base_period": partition.base_period,
                "blocks": [{
                    "name": b.name, "start": b.start, "stop": b.stop,
                    "period_steps": int(round(b.sample_period
                                              / partition.base_period)),
                    "rank": b.rank, "energy": b.energy,
                } for b in partition.blocks]})
        manifest.hsv = hsv
        manifest.eigen = eigen
        manifest.extra = {"blocks": extra_blocks,
                          "assembled_order": dd.assembled()[0].shape[0]}
        manifest.finalize(run_dir)
        return run_dir

    rom, proj, pair, triple, info = _train_block(
        seq, rank, energy, args.mo, args.mp, memory_limit,
        args.tangential, manifest.timings)
    with _phase(manifest.timings, "export"):
        matio.save_rom(run_dir / "rom", rom)
        if rom.hsv.size <= 1000:
            matio.write_csv_matrix(run_dir / "hsv.csv", rom.hsv)
        eigs, _ = eigenvalues(rom)
        if eigs.size * 2 <= 1000:
            matio.write_csv_matrix(
                run_dir / "rom_eigenvalues.csv",
                np.column_stack([eigs.real, eigs.imag]))
        if proj is not None:
            tdir = run_dir / "tangential"
            tdir.mkdir(exist_ok=True)
            matio.write_dmat(tdir / "left.dmat", proj.left_basis)
            matio.write_dmat(tdir / "right.dmat", proj.right_basis)
            matio.write_json(tdir / "projection.json", {
                "l1": proj.l1, "l2": proj.l2,
                "retained_energies": list(proj.retained_energies)})
        if args.modes:
            snaps = matio.read_snapshots(args.states)
            need = pair.m_p * pair.p
            if snaps.data.shape[1] < need:
                raise ConfigurationError(
                    "state snapshots hold %d columns, the Hankel split "
                    "needs %d" % (snaps.data.shape[1], need))
            modes = era.era_modes(pair, triple, snaps.data[:, :need])
            matio.write_dmat(run_dir / "modes_direct.dmat", modes.direct)
            matio.write_dmat(run_dir / "modes_adjoint.dmat", modes.adjoint)
    manifest.hsv = [float(v) for v in rom.hsv]
    manifest.eigen = _eigen_report(rom)
    manifest.extra = info
    manifest.finalize(run_dir)
    return run_dir


# ---------------------------------------------------------------------------
# predict


def _dedupe(label, used):
    candidate = label
    counter = 2
    while candidate in used:
        candidate = "%s_%d" % (label, counter)
        counter += 1
    used.add(candidate)
    return candidate


def _evaluate_rom_dir(rom_dir, label, sig, fom_traj, dt, t_final,
                      exclude, blocks):
    rom = matio.load_rom(rom_dir)
    if rom.step is None:
        ratio = 1

        def simulate():
            return simulate_rk3(rom.to_lti(), sig, dt, t_final,
                                np.zeros(rom.order))
    else:
        ratio = _integer_step_ratio(rom.step, dt, "rom %r step" % label)
        n_rom = (len(fom_traj) - 1) // ratio
        if n_rom < 1:
            raise ConfigurationError("rom %r period exceeds the "
                                     "prediction window" % label)
        rom_sig = _signal_on_grid(sig, ratio)

        def simulate():
            return simulate_discrete(rom, rom_sig, n_rom)

    entry, traj, err = _evaluate_model(label, simulate, fom_traj, ratio,
                                       exclude, blocks)
    entry.update(_eigen_report(rom))
    return entry, traj, err


def cmd_predict(args):
    config = _config_from(args)
    sys_ = matio.load_system(args.system)
    sig = _make_signal(args)
    dt = _resolve_dt(sys_, args.dt, "predict")
    if args.t_final <= 0:
        raise ConfigurationError("--t-final must be positive")
    blocks = _equal_output_blocks(sys_.q, args.variables, "predict")
    if (args.galerkin or args.lspg) and not args.snapshots:
        raise ConfigurationError("projection baselines need --snapshots")
    if args.lspg and args.lspg_dt is None:
        raise ConfigurationError("--lspg needs --lspg-dt")

    run_dir = _open_run_dir(args.out, config)
    manifest = RunManifest(config=config)

    with _phase(manifest.timings, "simulation"):
        fom_traj = _simulate_fom(sys_, sig, dt, args.t_final)
    with _phase(manifest.timings, "export"):
        matio.write_dmat(run_dir / "y_fom.dmat", fom_traj.outputs)
        if args.save_states:
            matio.write_snapshots(
                run_dir / "states_fom.dmat",
                SnapshotMatrix(data=fom_traj.states.T, step=dt))

    rows = []
    error_series = []
    used_labels = {"fom"}

    for rom_dir in args.rom or []:
        label = _dedupe(Path(rom_dir).name or "rom", used_labels)
        with _phase(manifest.timings, "simulation"):
            entry, traj, err = _evaluate_rom_dir(
                rom_dir, label, sig, fom_traj, dt, args.t_final,
                args.exclude_tail_cells, blocks)
        rows.append(entry)
        if traj is not None:
            with _phase(manifest.timings, "export"):
                matio.write_dmat(run_dir / ("y_%s.dmat" % label),
                                 traj.outputs)
            error_series.append((label, traj.times, err))

    basis = None
    state_blocks = None
    if args.snapshots:
        snaps = matio.read_snapshots(args.snapshots)
        pod_rank, pod_energy = _rank_energy(args.pod_rank, args.pod_energy)
        if pod_rank is None and pod_energy is None:
            pod_energy = era.DEFAULT_ENERGY
        build_basis = pod_blockwise if args.pod_blockwise else pod
        with _phase(manifest.timings, "rom_build"):
            basis = build_basis(snaps, mode_count=pod_rank,
                                energy=pod_energy)
        manifest.extra["pod_modes"] = basis.modes.shape[1]
        if args.exclude_tail_cells:
            state_blocks = snaps.variable_blocks

    fom_states = Trajectory(times=fom_traj.times, states=fom_traj.states,
                            outputs=fom_traj.states)

    if args.galerkin:
        if not isinstance(sys_, ContinuousLTI):
            raise ConfigurationError("the Galerkin baseline needs a "
                                     "continuous system")
        with _phase(manifest.timings, "rom_build"):
            grom = build_galerkin(sys_, basis)
        gdt = args.galerkin_dt if args.galerkin_dt else dt
        gratio = _integer_step_ratio(gdt, dt, "--galerkin-dt")
        gsig = _signal_on_grid(sig, gratio)
        label = _dedupe("galerkin", used_labels)
        with _phase(manifest.timings, "simulation"):
            entry, traj, err = _evaluate_model(
                label,
                lambda: simulate_galerkin(grom, gsig, gdt, args.t_final,
                                          scheme=args.galerkin_scheme),
                fom_states, gratio, args.exclude_tail_cells, state_blocks,
                compare="states")
        reduced_eigs = np.linalg.eigvals(grom.a_reduced)
        entry["message"] = entry.get("message") or \
            "reduced abscissa %.3e" % float(reduced_eigs.real.max())
        rows.append(entry)
        if traj is not None:
            with _phase(manifest.timings, "export"):
                matio.write_dmat(run_dir / ("y_%s.dmat" % label),
                                 traj.outputs)
            error_series.append((label, traj.times, err))

    if args.lspg:
        if not isinstance(sys_, ContinuousLTI):
            raise ConfigurationError("the LSPG baseline needs a "
                                     "continuous system")
        lratio = _integer_step_ratio(args.lspg_dt, dt, "--lspg-dt")
        with _phase(manifest.timings, "rom_build"):
            lrom = build_lspg(sys_, basis, args.lspg_dt, args.beta0)
        lsig = _signal_on_grid(sig, lratio)
        label = _dedupe("lspg", used_labels)
        with _phase(manifest.timings, "simulation"):
            entry, traj, err = _evaluate_model(
                label,
                lambda: simulate_lspg(lrom, lsig, args.t_final),
                fom_states, lratio, args.exclude_tail_cells, state_blocks,
                compare="states")
        rows.append(entry)
        if traj is not None:
            with _phase(manifest.timings, "export"):
                matio.write_dmat(run_dir / ("y_%s.dmat" % label),
                                 traj.outputs)
            error_series.append((label, traj.times, err))

    with _phase(manifest.timings, "export"):
        _write_errors_csv(run_dir / "errors.csv", error_series)
        _write_summary(run_dir, rows)
    manifest.eigen = _eigen_report(sys_)
    manifest.extra["models"] = [row["model"] for row in rows]
    manifest.finalize(run_dir)
    return run_dir


# ---------------------------------------------------------------------------
# sweep


def _sweep_cell(index, cell_dir, sys_, sig, fom_traj, dt, args, basis,
                count, period_steps, lspg_dt):
    cell_dir.mkdir(parents=True, exist_ok=True)
    timings = {}
    meta = {"cell": index, "sample_count": count,
            "period_steps": period_steps, "lspg_dt": lspg_dt}
    with _phase(timings, "sampling"):
        if isinstance(sys_, DiscreteLTI):
            seq = era.sample_impulse(sys_, period_steps * sys_.step, count)
        else:
            seq = sample_impulse_continuous(sys_, dt, period_steps, count)
    matio.write_markov(cell_dir / "markov.dmat", seq)
    rom, _, _, _, info = _train_block(
        seq, args.rank, args.energy, args.mo, args.mp,
        era.DEFAULT_MEMORY_LIMIT, None, timings)
    matio.save_rom(cell_dir / "rom", rom)

    rows = []
    series = []
    blocks = _equal_output_blocks(sys_.q, args.variables, "sweep")
    n_rom = (len(fom_traj) - 1) // period_steps
    if n_rom < 1:
        raise ConfigurationError("sampling period exceeds the prediction "
                                 "window")
    rom_sig = _signal_on_grid(sig, period_steps)
    with _phase(timings, "simulation"):
        entry, traj, err = _evaluate_model(
            "era", lambda: simulate_discrete(rom, rom_sig, n_rom),
            fom_traj, period_steps, args.exclude_tail_cells, blocks)
    entry.update(_eigen_report(rom))
    rows.append(entry)
    if traj is not None:
        matio.write_dmat(cell_dir / "y_era.dmat", traj.outputs)
        series.append(("era", traj.times, err))

    if lspg_dt is not None and basis is not None:
        lratio = _integer_step_ratio(lspg_dt, dt, "--lspg-dts")
        lrom = build_lspg(sys_, basis, lspg_dt, args.beta0)
        fom_states = Trajectory(times=fom_traj.times,
                                states=fom_traj.states,
                                outputs=fom_traj.states)
        with _phase(timings, "simulation"):
            entry, traj, err = _evaluate_model(
                "lspg",
                lambda: simulate_lspg(lrom, _signal_on_grid(sig, lratio),
                                      float(fom_traj.times[-1])),
                fom_states, lratio, args.exclude_tail_cells, None,
                compare="states")
        rows.append(entry)
        if traj is not None:
            matio.write_dmat(cell_dir / "y_lspg.dmat", traj.outputs)
            series.append(("lspg", traj.times, err))

    _write_errors_csv(cell_dir / "errors.csv", series)
    _write_summary(cell_dir, rows)
    matio.write_json(cell_dir / "cell.json", {
        **meta, "selected_rank": info["selected_rank"],
        "captured_energy": info["captured_energy"],
        "timings": {k: round(v, 6) for k, v in timings.items()}})
    return [dict(meta, **row) for row in rows]


def cmd_sweep(args):
    config = _config_from(args)
    sys_ = matio.load_system(args.system)
    sig = _make_signal(args)
    dt = _resolve_dt(sys_, args.dt, "sweep")
    if args.t_final <= 0:
        raise ConfigurationError("--t-final must be positive")
    counts = _parse_int_list(args.counts, "--counts")
    period_steps = _parse_int_list(args.period_steps, "--period-steps")
    if any(c < 2 for c in counts):
        raise ConfigurationError("--counts entries must be >= 2")
    if any(p < 1 for p in period_steps):
        raise ConfigurationError("--period-steps entries must be >= 1")
    _rank_energy(args.rank, args.energy)
    lspg_dts = (_parse_float_list(args.lspg_dts, "--lspg-dts")
                if args.lspg_dts else [None])
    if args.lspg_dts and not args.snapshots:
        raise ConfigurationError("--lspg-dts needs --snapshots")

    run_dir = _open_run_dir(args.out, config)
    manifest = RunManifest(config=config)

    basis = None
    if args.snapshots:
        snaps = matio.read_snapshots(args.snapshots)
        pod_rank, pod_energy = _rank_energy(args.pod_rank, args.pod_energy)
        if pod_rank is None and pod_energy is None:
            pod_energy = era.DEFAULT_ENERGY
        with _phase(manifest.timings, "rom_build"):
            basis = pod(snaps, mode_count=pod_rank, energy=pod_energy)

    with _phase(manifest.timings, "simulation"):
        fom_traj = _simulate_fom(sys_, sig, dt, args.t_final)
    matio.write_dmat(run_dir / "y_fom.dmat", fom_traj.outputs)

    cells = list(enumerate(product(counts, period_steps, lspg_dts)))
    env_workers = os.environ.get("ROMKIT_WORKERS", "").strip()
    if env_workers:
        try:
            workers = max(1, int(env_workers))
        except ValueError as exc:
            raise ConfigurationError("ROMKIT_WORKERS must be an integer: "
                                     "%r" % env_workers) from exc
    else:
        workers = min(len(cells), os.cpu_count() or 1)

    results = {}

    def run_cell(item):
        index, (count, steps, ldt) = item
        cell_dir = run_dir / ("cell_%03d" % index)
        try:
            return index, _sweep_cell(index, cell_dir, sys_, sig, fom_traj,
                                      dt, args, basis, count, steps, ldt)
        except Exception as exc:  # per-cell failures must not stop others
            row = {k: None for k in _SUMMARY_COLUMNS}
            row.update(cell=index, sample_count=count, period_steps=steps,
                       lspg_dt=ldt, model="era", status="failed",
                       message="%s: %s" % (type(exc).__name__, exc))
            return index, [row]

    with _phase(manifest.timings, "cells"):
        if workers == 1:
            for item in cells:
                index, rows = run_cell(item)
                results[index] = rows
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for index, rows in pool.map(run_cell, cells):
                    results[index] = rows

    with _phase(manifest.timings, "export"):
        columns = ("cell", "sample_count", "period_steps",
                   "lspg_dt") + _SUMMARY_COLUMNS
        lines = [",".join(columns)]
        for index in sorted(results):
            for row in results[index]:
                cells_out = []
                for col in columns:
                    value = row.get(col)
                    if value is None:
                        cells_out.append("")
                    elif isinstance(value, float):
                        cells_out.append("%.17g" % value)
                    else:
                        cells_out.append(str(value))
                lines.append(",".join(cells_out))
        matio.atomic_write_text(run_dir / "aggregate.csv",
                                "\n".join(lines) + "\n")
    manifest.eigen = _eigen_report(sys_)
    manifest.extra = {"cells": len(cells), "workers": workers}
    manifest.finalize(run_dir)
    return run_dir


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Argument errors map to the configuration exit code."""

    def error(self, message):
        raise ConfigurationError(message)


def _add_common(parser):
    parser.add_argument("--out", required=True,
                        help="directory that receives the run directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed echoed into the manifest for any "
                             "randomized fixtures")
    parser.add_argument("--verbose", action="store_true",
                        help="log progress to stderr")


def _add_signal(parser):
    parser.add_argument("--signal", required=True,
                        choices=("impulse", "sinusoid", "gaussian",
                                 "samples"))
    parser.add_argument("--amplitude", type=float)
    parser.add_argument("--frequency", type=float)
    parser.add_argument("--mean", type=float)
    parser.add_argument("--std", type=float)
    parser.add_argument("--signal-file")


def build_parser():
    parser = _Parser(prog="romkit",
                     description="Non-intrusive balanced model reduction "
                                 "of linear time-invariant systems.")
    parser.add_argument("--version", action="version",
                        version="romkit " + __version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("fom", help="build or ingest a full-order system")
    p.add_argument("--synthetic", action="store_true",
                   help="build the stiff advection-diffusion-reaction "
                        "testbed")
    p.add_argument("--load", nargs=3, metavar=("A", "B", "C"),
                   help="ingest system matrices from files")
    p.add_argument("--cells", type=int)
    p.add_argument("--advection", type=float, default=1.0)
    p.add_argument("--diffusivity", type=float, default=1e-3)
    p.add_argument("--stiffness", type=float, default=0.0,
                   help="target condition number of A (0 = no reaction "
                        "block)")
    p.add_argument("--dx", type=float, default=1e-2)
    p.add_argument("--variables", type=int, default=1)
    p.add_argument("--input-cell", type=int, default=0)
    p.add_argument("--kind", choices=("continuous", "discrete"),
                   default="continuous",
                   help="kind of a loaded system without --descriptor")
    p.add_argument("--step", type=float,
                   help="step of a loaded discrete system")
    p.add_argument("--descriptor", help="JSON descriptor for --load")
    p.add_argument("--discretize", type=float,
                   help="write the zero-order-hold discretization at "
                        "this step instead")
    _add_common(p)
    p.set_defaults(func=cmd_fom)

    p = sub.add_parser("impulse", help="sample the impulse response")
    p.add_argument("--system", required=True,
                   help="system directory from 'fom'")
    p.add_argument("--dt", type=float,
                   help="integrator step (continuous systems)")
    p.add_argument("--period-steps", type=int,
                   help="record every this many steps (default 1)")
    p.add_argument("--period", type=float,
                   help="sampling period; must be an integer multiple "
                        "of the step")
    p.add_argument("--count", type=int, required=True,
                   help="number of Markov samples")
    p.add_argument("--keep-states", action="store_true",
                   help="also store full states at the sample instants")
    _add_common(p)
    p.set_defaults(func=cmd_impulse)

    p = sub.add_parser("train", help="identify reduced models from "
                                     "Markov samples")
    p.add_argument("--markov", required=True,
                   help="markov.dmat from 'impulse'")
    p.add_argument("--rank", type=int, help="fixed reduced order")
    p.add_argument("--energy", type=float,
                   help="singular-value energy threshold (default 0.9999)")
    p.add_argument("--mo", type=int, help="Hankel block rows")
    p.add_argument("--mp", type=int, help="Hankel block columns")
    p.add_argument("--memory-limit", type=int,
                   help="Hankel memory cap in bytes")
    p.add_argument("--partition",
                   help="JSON file with output blocks for per-block "
                        "training")
    p.add_argument("--tangential",
                   help="'auto' or 'L1,L2' tangential direction counts")
    p.add_argument("--modes", action="store_true",
                   help="write direct/adjoint balancing modes "
                        "(full-state outputs)")
    p.add_argument("--states",
                   help="states.dmat from 'impulse --keep-states'")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="simulate models against the "
                                       "full system")
    p.add_argument("--system", required=True)
    p.add_argument("--rom", action="append",
                   help="ROM directory from 'train' (repeatable)")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--variables", type=int, default=1,
                   help="split outputs into equal blocks for tail "
                        "exclusion")
    p.add_argument("--exclude-tail-cells", type=int, default=0)
    p.add_argument("--snapshots",
                   help="snapshot file for the projection baselines")
    p.add_argument("--pod-rank", type=int)
    p.add_argument("--pod-energy", type=float)
    p.add_argument("--pod-blockwise", action="store_true",
                   help="fit one basis per variable block")
    p.add_argument("--galerkin", action="store_true")
    p.add_argument("--galerkin-scheme", choices=("rk3", "euler"),
                   default="rk3")
    p.add_argument("--galerkin-dt", type=float)
    p.add_argument("--lspg", action="store_true")
    p.add_argument("--lspg-dt", type=float)
    p.add_argument("--beta0", type=int, choices=(0, 1), default=1)
    p.add_argument("--save-states", action="store_true",
                   help="store the full-system states as a snapshot file")
    _add_signal(p)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="grid the sampling parameters")
    p.add_argument("--system", required=True)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--counts", required=True,
                   help="comma-separated sample counts")
    p.add_argument("--period-steps", default="1",
                   help="comma-separated sampling ratios (default 1)")
    p.add_argument("--rank", type=int)
    p.add_argument("--energy", type=float)
    p.add_argument("--mo", type=int)
    p.add_argument("--mp", type=int)
    p.add_argument("--variables", type=int, default=1)
    p.add_argument("--exclude-tail-cells", type=int, default=0)
    p.add_argument("--lspg-dts", help="comma-separated LSPG steps")
    p.add_argument("--beta0", type=int, choices=(0, 1), default=1)
    p.add_argument("--snapshots")
    p.add_argument("--pod-rank", type=int)
    p.add_argument("--pod-energy", type=float)
    _add_signal(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "verbose", False):
            logging.basicConfig(level=logging.INFO, stream=sys.stderr)
        run_dir = args.func(args)
    except RomkitError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return exc.exit_code
    print(run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
