"""Experiment runner: round trips, table checks, security sweeps, leakage estimates.

All outputs are deterministic functions of the resolved run spec: no
timestamps, no machine identifiers.  Statistics land in CSV files with a
sidecar metadata JSON; every row carries the seed, a hash of the resolved
spec, and the tool version.  Flags beat config-file entries, which beat
defaults.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import (
    EveStrategy,
    InsufficientSamples,
    estimate_detection,
    estimate_information,
    predicted_abort_rate,
    predicted_first_check_violation_rate,
)
from .codec import MessageBits, expected_bell, pack_bits, random_message, unpack_bits
from .qsim import (
    PauliOp,
    QubitSlot,
    apply_pauli,
    bell_probabilities,
    make_singlet,
)
from .session import (
    Aborted,
    CapacityExceeded,
    ConfigInvalid,
    ProtocolConfig,
    run_protocol,
)

_MODES = ("roundtrip", "table-check", "security-sweep", "info-estimate")

_DEFAULTS: dict[str, object] = {
    "mode": None,
    "pairs": 64,
    "check_fraction": 0.25,
    "decoys": 4,
    "eve": "none",
    "eve_prob": 1.0,
    "seed": 0,
    "trials": 1000,
    "alice_msg": None,
    "bob_msg": None,
    "out": None,
    "transcript": None,
}

_INT_KEYS = {"pairs", "decoys", "seed", "trials"}
_FLOAT_KEYS = {"check_fraction", "eve_prob"}


class CliError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qduplex",
        description="Simulate two-way direct messaging over EPR pair blocks.",
    )
    parser.add_argument("--mode", choices=_MODES, help="what to run")
    parser.add_argument("--config", help="key=value file; flags override its entries")
    parser.add_argument("--pairs", type=int, help="EPR pairs per run (default 64)")
    parser.add_argument(
        "--check-fraction", type=float, help="fraction sampled by the first check (default 0.25)"
    )
    parser.add_argument("--decoys", type=int, help="decoy pairs for the second check (default 4)")
    parser.add_argument(
        "--eve",
        help="channel attack: none, intercept-z, intercept-x, intercept-rand, substitute",
    )
    parser.add_argument("--eve-prob", type=float, help="per-photon attack probability (default 1.0)")
    parser.add_argument("--seed", type=int, help="64-bit run seed (default 0)")
    parser.add_argument("--trials", type=int, help="runs per estimate (default 1000)")
    parser.add_argument("--alice-msg", help="hex string, @file, or 'random'")
    parser.add_argument("--bob-msg", help="hex string, @file, or 'random'")
    parser.add_argument("--out", help="CSV output path; writes <out>.meta.json beside it")
    parser.add_argument("--transcript", help="JSONL transcript path (roundtrip mode)")
    return parser


def _parse_config_file(path: str) -> dict[str, object]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    entries: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _DEFAULTS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if key in _INT_KEYS:
                entries[key] = int(value)
            elif key in _FLOAT_KEYS:
                entries[key] = float(value)
            else:
                entries[key] = value
        except ValueError:
            raise CliError(f"{path}:{lineno}: bad value for {key}: {value!r}")
    return entries


def _resolve(ns: argparse.Namespace) -> dict[str, object]:
    spec = dict(_DEFAULTS)
    if ns.config:
        spec.update(_parse_config_file(ns.config))
    for key in _DEFAULTS:
        flag_value = getattr(ns, key)
        if flag_value is not None:
            spec[key] = flag_value
    if spec["mode"] not in _MODES:
        raise CliError(f"mode must be one of {', '.join(_MODES)}; got {spec['mode']!r}")
    return spec


def _config_hash(spec: dict[str, object]) -> str:
    hashed = {k: v for k, v in spec.items() if k not in ("out", "transcript")}
    blob = json.dumps(hashed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _protocol_config(spec: dict[str, object]) -> ProtocolConfig:
    strategy = EveStrategy.from_name(str(spec["eve"]), float(spec["eve_prob"]))
    config = ProtocolConfig(
        n_pairs=int(spec["pairs"]),
        check_fraction_1=float(spec["check_fraction"]),
        check_count_2=int(spec["decoys"]),
        seed=int(spec["seed"]),
        eve=strategy,
    )
    config.validate()
    return config


def _parse_message(text: object, capacity_bits: int, seed: int, label: int) -> MessageBits:
    if text is None or text == "random":
        rng = np.random.default_rng(np.random.SeedSequence([seed, label]))
        return random_message(capacity_bits, rng)
    text = str(text)
    if text.startswith("@"):
        try:
            data = Path(text[1:]).read_bytes()
        except OSError as exc:
            raise CliError(f"cannot read message file: {exc}")
        return pack_bits(data)
    try:
        data = bytes.fromhex(text)
    except ValueError:
        raise CliError(f"message must be hex, @file, or 'random': {text!r}")
    return pack_bits(data)


def _bits_text(message: MessageBits) -> str:
    """Hex when the payload is whole bytes, else the raw bit string."""
    if message.payload_bits % 8 == 0:
        return unpack_bits(message).hex() or "(empty)"
    return "".join(str(b) for b in message.bits[: message.payload_bits])


def _write_csv(path: str, header: list[str], rows: list[list[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(v) for v in row])


def _write_sidecar(out: str, spec: dict[str, object], config_hash: str) -> None:
    meta = {
        "tool": "qduplex",
        "version": __version__,
        "mode": spec["mode"],
        "seed": spec["seed"],
        "config_hash": config_hash,
        "spec": {k: v for k, v in spec.items() if k not in ("out", "transcript")},
    }
    Path(f"{out}.meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _stamp(spec: dict[str, object], config_hash: str) -> list[object]:
    return [spec["seed"], config_hash, __version__]


def _mode_table_check(spec: dict[str, object]) -> int:
    config_hash = _config_hash(spec)
    all_ok = True
    rows = []
    print("      " + "  ".join(f"{op.name}({op.code >> 1}{op.code & 1})" for op in PauliOp))
    for alice_op in PauliOp:
        cells = []
        for bob_op in PauliOp:
            expect = expected_bell(alice_op, bob_op)
            ok = True
            for slot in (QubitSlot.C, QubitSlot.M):
                state = apply_pauli(make_singlet(), alice_op, QubitSlot.M)
                state = apply_pauli(state, bob_op, slot)
                prob = bell_probabilities(state)[expect.index]
                ok = ok and abs(prob - 1.0) < 1e-9
            all_ok = all_ok and ok
            cells.append(expect.name.lower())
            rows.append(
                [alice_op.name, bob_op.name, expect.name.lower(), ok] + _stamp(spec, config_hash)
            )
        print(f"{alice_op.name}({alice_op.code >> 1}{alice_op.code & 1})  " + "  ".join(f"{c:<9}" for c in cells))
    if spec["out"]:
        _write_csv(
            str(spec["out"]),
            ["alice_op", "bob_op", "bell_state", "verified", "seed", "config_hash", "version"],
            rows,
        )
        _write_sidecar(str(spec["out"]), spec, config_hash)
    if not all_ok:
        print("simulator disagreed with the encoding table", file=sys.stderr)
        return 1
    print("operation table verified against the simulator: 16/16 combinations, both slots")
    return 0


def _mode_roundtrip(spec: dict[str, object]) -> int:
    config_hash = _config_hash(spec)
    config = _protocol_config(spec)
    alice_msg = _parse_message(spec["alice_msg"], config.alice_capacity_bits, config.seed, 1)
    bob_msg = _parse_message(spec["bob_msg"], config.bob_capacity_bits, config.seed, 2)
    transcript = run_protocol(config, alice_msg, bob_msg)
    if spec["transcript"]:
        transcript.write_jsonl(str(spec["transcript"]))
        print(f"transcript written to {spec['transcript']}")
    completed = transcript.completed
    verdict = transcript.verdict
    if completed:
        alice_ok = verdict.bob_decoded == alice_msg
        bob_ok = verdict.alice_decoded == bob_msg
        print("run completed")
        print(f"alice -> bob: {_bits_text(verdict.bob_decoded)} ({'match' if alice_ok else 'MISMATCH'})")
        print(f"bob -> alice: {_bits_text(verdict.alice_decoded)} ({'match' if bob_ok else 'MISMATCH'})")
        abort_phase = ""
        abort_reason = ""
    else:
        alice_ok = bob_ok = False
        abort_phase = verdict.phase.value
        abort_reason = verdict.reason
        print(f"run aborted in {abort_phase}: {abort_reason}")
    if spec["out"]:
        header = [
            "mode", "pairs", "check_fraction", "decoys", "eve", "eve_prob",
            "completed", "abort_phase", "abort_reason",
            "alice_payload_bits", "bob_payload_bits", "alice_decoded_ok", "bob_decoded_ok",
            "seed", "config_hash", "version",
        ]
        row = [
            spec["mode"], config.n_pairs, config.check_fraction_1, config.check_count_2,
            config.eve.kind.value, config.eve.attack_prob,
            completed, abort_phase, abort_reason,
            alice_msg.payload_bits, bob_msg.payload_bits, alice_ok, bob_ok,
        ] + _stamp(spec, config_hash)
        _write_csv(str(spec["out"]), header, [row])
        _write_sidecar(str(spec["out"]), spec, config_hash)
    return 0 if completed else 3


def _mode_security_sweep(spec: dict[str, object]) -> int:
    config_hash = _config_hash(spec)
    config = _protocol_config(spec)
    strategy = config.eve
    trials = int(spec["trials"])
    rng = np.random.default_rng(np.random.SeedSequence([int(spec["seed"]), 3]))
    stats = estimate_detection(strategy, config, trials, rng)
    photon_pred = predicted_first_check_violation_rate(strategy)
    abort_pred = predicted_abort_rate(photon_pred, config.first_check_count)
    print(
        f"strategy {strategy.kind.value} p={strategy.attack_prob}: "
        f"per-photon rate {stats.per_photon_rate:.4f} "
        f"[{stats.per_photon_ci[0]:.4f}, {stats.per_photon_ci[1]:.4f}] "
        f"(predicted {photon_pred:.4f}, {stats.checked_photons} photons)"
    )
    print(
        f"abort rate {stats.abort_rate:.4f} "
        f"[{stats.abort_ci[0]:.4f}, {stats.abort_ci[1]:.4f}] "
        f"(predicted {abort_pred:.4f}, {trials} runs, {config.first_check_count} check photons)"
    )
    if spec["out"]:
        header = [
            "mode", "eve", "eve_prob", "pairs", "check_fraction", "decoys", "trials",
            "checked_photons", "violations", "per_photon_rate",
            "per_photon_ci_low", "per_photon_ci_high", "predicted_per_photon_rate",
            "aborted_runs", "abort_rate", "abort_ci_low", "abort_ci_high",
            "predicted_abort_rate", "seed", "config_hash", "version",
        ]
        row = [
            spec["mode"], strategy.kind.value, strategy.attack_prob,
            config.n_pairs, config.check_fraction_1, config.check_count_2, trials,
            stats.checked_photons, stats.violations, stats.per_photon_rate,
            stats.per_photon_ci[0], stats.per_photon_ci[1], photon_pred,
            stats.aborted_runs, stats.abort_rate, stats.abort_ci[0], stats.abort_ci[1],
            abort_pred,
        ] + _stamp(spec, config_hash)
        _write_csv(str(spec["out"]), header, [row])
        _write_sidecar(str(spec["out"]), spec, config_hash)
    return 0


def _mode_info_estimate(spec: dict[str, object]) -> int:
    config_hash = _config_hash(spec)
    config = _protocol_config(spec)
    strategy = config.eve
    trials = int(spec["trials"])
    rng = np.random.default_rng(np.random.SeedSequence([int(spec["seed"]), 4]))
    stats = estimate_information(strategy, config, trials, rng)
    print(
        f"strategy {strategy.kind.value} p={strategy.attack_prob}: "
        f"{stats.completed_runs}/{trials} runs completed, {stats.message_pairs} message pairs"
    )
    print(f"announced results vs alice bits: {stats.announced_vs_alice_bits:.6f} bits/pair")
    print(f"announced results vs bob bits:   {stats.announced_vs_bob_bits:.6f} bits/pair")
    print(f"eve's guesses vs alice bits:     {stats.eve_guess_vs_alice_bits:.6f} bits/pair")
    if spec["out"]:
        header = [
            "mode", "eve", "eve_prob", "pairs", "check_fraction", "decoys", "trials",
            "completed_runs", "message_pairs",
            "announced_vs_alice_bits", "announced_vs_bob_bits", "eve_guess_vs_alice_bits",
            "seed", "config_hash", "version",
        ]
        row = [
            spec["mode"], strategy.kind.value, strategy.attack_prob,
            config.n_pairs, config.check_fraction_1, config.check_count_2, trials,
            stats.completed_runs, stats.message_pairs,
            stats.announced_vs_alice_bits, stats.announced_vs_bob_bits,
            stats.eve_guess_vs_alice_bits,
        ] + _stamp(spec, config_hash)
        _write_csv(str(spec["out"]), header, [row])
        _write_sidecar(str(spec["out"]), spec, config_hash)
    return 0


_DISPATCH = {
    "table-check": _mode_table_check,
    "roundtrip": _mode_roundtrip,
    "security-sweep": _mode_security_sweep,
    "info-estimate": _mode_info_estimate,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        spec = _resolve(ns)
        return _DISPATCH[str(spec["mode"])](spec)
    except (
        CliError,
        ConfigInvalid,
        CapacityExceeded,
        InsufficientSamples,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
