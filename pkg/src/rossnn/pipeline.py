"""End-to-end transmission experiments: tx -> fibre -> preamp -> network -> PD/ADC -> readout.

Training and test traces are simulated separately with independent seeds
(so the readout can never learn the generator), each ``2**k`` symbols long
so every waveform is a power of two.  Guard symbols at both trace edges are
dropped before training and scoring because all filtering is circular.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .baselines import VolterraSpec, estimate_channel, mlse_viterbi, volterra_features
from .config import Seeds
from .fiber import AmplifierSpec, FiberSpec, amplify, propagate
from .network import NetworkTopology, build_topology, process
from .readout import (
    assemble_features, compute_ber, compute_ser, decide, fit_readout, level_means, predict,
    train_ridge,
)
from .receiver import AdcSpec, DecisionSamples, PdSpec, digitize, full_scale_range, optimize_phase, photodetect, analog_front_end, decimate, samples_per_symbol
from .transmitter import LaserSpec, SymbolStream, TxSpec, constellation, generate_symbols, modulate

log = logging.getLogger(__name__)

GHZ = 1e9


class PipelineError(ValueError):
    pass


def dbm_to_w(p_dbm: float) -> float:
    return 1e-3 * 10 ** (p_dbm / 10)


@dataclass(frozen=True)
class LinkSpec:
    """Everything between the symbol source and the decision samples."""

    tx: TxSpec
    fibers: tuple = ()
    amplifier: AmplifierSpec | None = None
    pd: PdSpec = field(default_factory=PdSpec)
    adc: AdcSpec = field(default_factory=AdcSpec)
    fmt: str = "PAM4"
    baud: float = 112e9

    @property
    def sample_rate(self) -> float:
        return self.baud * self.tx.oversampling

    @property
    def span_loss_db(self) -> float:
        return float(sum(f.alpha_db_km * f.length / 1e3 for f in self.fibers))


def link_from_config(cfg: dict) -> LinkSpec:
    sig = cfg.get("signal", {})
    txc = cfg.get("transmitter", {})
    lc = txc.get("laser", {})
    laser = LaserSpec(mode=lc.get("mode", "phase_noise_cw"),
                      power=dbm_to_w(float(txc.get("power_dbm", 0.0))),
                      linewidth=float(lc.get("linewidth_khz", 100.0)) * 1e3,
                      noise=bool(lc.get("noise", True)))
    mzm = txc.get("mzm_bandwidth_ghz", 60.0)
    tx = TxSpec(laser=laser, oversampling=int(txc.get("oversampling", 4)),
                mzm_bandwidth=None if mzm is None else float(mzm) * GHZ,
                extinction_ratio_db=float(txc.get("extinction_ratio_db", 20.0)),
                cspr_db=float(txc.get("cspr_db", 9.0)),
                pulse=txc.get("pulse", "nrz"), rolloff=float(txc.get("rolloff", 0.1)))
    fibers = tuple(FiberSpec.from_config(f) for f in cfg.get("fiber", []) or [])
    amp = None
    ac = cfg.get("amplifier")
    if ac:
        gain = ac.get("gain_db", "auto")
        if gain == "auto":
            gain = sum(f.alpha_db_km * f.length / 1e3 for f in fibers) + float(ac.get("extra_db", 0.0))
        amp = AmplifierSpec(gain_db=float(gain), noise_figure_db=float(ac.get("noise_figure_db", 5.0)),
                            noise=bool(ac.get("noise", True)))
    rc = cfg.get("receiver", {})
    bw = rc.get("bandwidth_ghz", 35.0)
    pd = PdSpec(responsivity=float(rc.get("responsivity_a_w", 0.8)),
                bandwidth=None if bw is None else float(bw) * GHZ,
                thermal_noise_density=float(rc.get("thermal_noise_pa_rthz", 10.0)) * 1e-12,
                shot_noise=bool(rc.get("shot_noise", True)),
                thermal_noise=bool(rc.get("thermal_noise", True)))
    dc = cfg.get("adc", {})
    abw = dc.get("analog_bandwidth_ghz", 35.0)
    adc = AdcSpec(bits=dc.get("bits", 8), analog_bandwidth=None if abw is None else float(abw) * GHZ,
                  sampling_phase=dc.get("sampling_phase", "auto"),
                  full_scale_sigma=float(dc.get("full_scale_sigma", 4.0)))
    return LinkSpec(tx, fibers, amp, pd, adc, sig.get("format", "PAM4"),
                    float(sig.get("baud_gbd", 112.0)) * GHZ)


def transmit(link: LinkSpec, n_symbols: int, seeds: Seeds, segment: str):
    """Symbols and the optical field at the receiver input (after the preamp)."""
    stream = generate_symbols(link.fmt, n_symbols, seeds(segment, "symbols"), link.baud)
    w = modulate(stream, link.tx, seeds(segment, "laser"))
    for i, f in enumerate(link.fibers):
        w = propagate(w, f)
    if link.amplifier is not None:
        w = amplify(w, link.amplifier, seeds(segment, "amplifier"))
    return stream, w


def detect(w, topology: NetworkTopology | None, link: LinkSpec, seeds: Seeds, segment: str, tag: str):
    outs = [w] if topology is None else process(w, topology)
    return [photodetect(o, link.pd, seeds(segment, tag, "pd", j)) for j, o in enumerate(outs)]


# -- readout stages --------------------------------------------------------

def targets(stream: SymbolStream) -> np.ndarray:
    s = np.asarray(stream.symbols)
    if stream.format in ("PAM4", "ANALOG"):
        return s.real
    return np.column_stack([s.real, s.imag])


def _interior(F, n, guard):
    keep = (F.index >= guard) & (F.index < n - guard)
    return F.X[keep], F.index[keep]


@dataclass(frozen=True)
class ReadoutResult:
    ber: float
    ser: float
    n_symbols: int
    lam: float
    phase: float
    record: dict = field(default_factory=dict)


def _features(ds, k, volterra):
    if volterra is not None:
        return volterra_features(ds.values, volterra)
    return assemble_features(ds, k)


def score_readout(ds_train: DecisionSamples, ds_test: DecisionSamples, st_train: SymbolStream,
                  st_test: SymbolStream, k: int, guard: int, lam=None,
                  volterra: VolterraSpec | None = None) -> ReadoutResult:
    """Train on the training trace, report BER/SER on the test trace."""
    fmt = st_train.format
    Ftr = _features(ds_train, k, volterra)
    Fte = _features(ds_test, k, volterra)
    Xtr, itr = _interior(Ftr, ds_train.n_symbols, guard)
    Xte, ite = _interior(Fte, ds_test.n_symbols, guard)
    ytr = targets(st_train)[itr]
    model = fit_readout(Xtr, ytr, lam if lam is not None else (volterra.lam if volterra else None))
    est_te = predict(model, Xte)
    if fmt == "PAM4":
        lv = level_means(predict(model, Xtr), st_train.indices[itr], 4)
        dec = decide(est_te, fmt, lv)
    else:
        dec = decide(est_te, fmt)
    ref = st_test.indices[ite]
    return ReadoutResult(compute_ber(dec, ref, fmt), compute_ser(dec, ref), int(ref.size),
                         model.lam, ds_train.phase, model.to_record())


def _train_mse_score(st_train, k, guard, lam_rel=1e-3):
    y_all = targets(st_train)

    def score(ds):
        F = assemble_features(ds, k)
        X, idx = _interior(F, ds.n_symbols, guard)
        y = y_all[idx]
        m = train_ridge(X, y, lam_rel * X.shape[0])
        return float(np.mean((predict(m, X) - y) ** 2))

    return score


def decision_samples(e_train, e_test, link: LinkSpec, n_train: int, n_test: int, st_train, k, guard):
    """Sample both traces at the training-optimal phase with training full scales."""
    adc = link.adc
    if adc.sampling_phase == "auto":
        phase, _ = optimize_phase(e_train, adc, link.baud, n_train, _train_mse_score(st_train, k, guard))
    else:
        phase = float(adc.sampling_phase)
    sps = samples_per_symbol(e_train[0].sample_rate, link.baud)
    scales = None
    if adc.bits is not None:
        scales = []
        for e in e_train:
            v = decimate(analog_front_end(e, adc), sps, phase, n_train)
            scales.append(adc.full_scale or full_scale_range(v, adc.full_scale_sigma))
    ds_tr = digitize(e_train, adc, link.baud, n_train, phase, full_scales=scales)
    ds_te = digitize(e_test, adc, link.baud, n_test, phase, full_scales=scales)
    return ds_tr, ds_te


def run_mlse(ds_train, ds_test, st_train, st_test, guard, nu=4, state_budget=4096):
    """MLSE on a single photodiode: LS channel on training, Viterbi on test."""
    lv = constellation(st_train.format).real
    if st_train.format != "PAM4":
        raise PipelineError("MLSE baseline is implemented for PAM4 intensity links")
    tx_tr = lv[st_train.indices]
    rx_tr = ds_train.values[:, 0]
    sl = slice(guard, ds_train.n_symbols - guard)
    est = estimate_channel(rx_tr[sl], tx_tr[sl], nu, fit_offset=True)
    dec = mlse_viterbi(ds_test.values[:, 0], est, lv, state_budget=state_budget)
    n = dec.size
    keep = np.arange(guard, n - guard)
    ref = st_test.indices[keep]
    return ReadoutResult(compute_ber(dec[keep], ref, "PAM4"), compute_ser(dec[keep], ref), int(ref.size),
                         float("nan"), ds_train.phase,
                         {"taps": " ".join(repr(float(x)) for x in est.taps), "offset": repr(est.offset),
                          "delay": est.delay, "residual": repr(est.residual)})


def variant_topology(vcfg: dict, base: dict | None):
    """Resolve a variant's network section (``null`` means a bare photodiode)."""
    net = vcfg.get("network", "base")
    if net is None:
        return None
    if net == "base":
        net = base
    if net is None:
        return None
    net = dict(net)
    if vcfg.get("loop", "keep") is None:
        net["loop"] = None
    return build_topology(net)


def run_transmission(cfg: dict, cache: dict | None = None) -> list[dict]:
    """Run every configured receiver variant on one link; one record per variant.

    ``cache`` may hold fibre outputs keyed by the link part of the config so
    that network scans do not re-propagate.
    """
    seeds = Seeds.from_config(cfg)
    link = link_from_config(cfg)
    sig = cfg.get("signal", {})
    n_train = int(sig.get("n_train", 2**15))
    n_test = int(sig.get("n_test", 2**17))
    guard = int(sig.get("guard", 64))
    rd = cfg.get("readout", {})
    k = int(rd.get("taps", 21))
    lam = rd.get("lambda")

    key = None
    if cache is not None:
        from .config import dump_config
        key = dump_config({s: cfg.get(s) for s in ("seed", "seed_overrides", "signal", "transmitter", "fiber", "amplifier")})
    if cache is not None and key in cache:
        st_tr, w_tr, st_te, w_te = cache[key]
    else:
        st_tr, w_tr = transmit(link, n_train, seeds, "train")
        st_te, w_te = transmit(link, n_test, seeds, "test")
        if cache is not None:
            cache.clear()
            cache[key] = (st_tr, w_tr, st_te, w_te)

    variants = cfg.get("variants") or [{"name": "ross"}]
    base_net = cfg.get("network")
    out = []
    for v in variants:
        name = v["name"]
        kind = v.get("kind", "readout")
        topo = variant_topology(v, base_net) if kind == "readout" else None
        e_tr = detect(w_tr, topo, link, seeds, "train", name)
        e_te = detect(w_te, topo, link, seeds, "test", name)
        kk = int(v.get("taps", k))
        ds_tr, ds_te = decision_samples(e_tr, e_te, link, n_train, n_test, st_tr, kk, guard)
        if kind == "mlse":
            r = run_mlse(ds_tr, ds_te, st_tr, st_te, guard, int(v.get("memory", 4)),
                         int(v.get("state_budget", 4096)))
        elif kind == "vnle":
            ks = v.get("kernel", [91, 31, 11])
            vs = VolterraSpec(int(ks[0]), int(ks[1]), int(ks[2]), v.get("lambda"))
            r = score_readout(ds_tr, ds_te, st_tr, st_te, kk, guard, volterra=vs)
        else:
            r = score_readout(ds_tr, ds_te, st_tr, st_te, kk, guard, v.get("lambda", lam))
        log.info("%s: BER %.3e (SER %.3e, %d symbols)", name, r.ber, r.ser, r.n_symbols)
        out.append({"variant": name, "ber": r.ber, "ser": r.ser, "n_symbols": r.n_symbols,
                    "lambda": r.lam, "phase": r.phase, "model": r.record})
    return out
