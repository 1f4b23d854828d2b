"""Pulse-level simulation of a protocol run with the hidden photon-number truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..params import SETS, ChannelParams, CountTable, ProtocolParams
from .rng import stream

# Labels of key-set detections. NON_SINGLE covers vacuum and multi-photon
# pulses; the Pauli labels say whether a single-photon pulse carries a bit
# flip (X), a phase flip (Z), both (Y) or neither (I).
NON_SINGLE, LABEL_I, LABEL_X, LABEL_Y, LABEL_Z = range(5)

TAIL_MASS = 1e-12
CHUNK = 1 << 20


def poisson_table(mu: float, tail: float = TAIL_MASS) -> np.ndarray:
    """Cumulative Poisson probabilities truncated where the tail is below ``tail``.

    The remaining tail mass is folded into the last bucket.
    """
    pmf = [math.exp(-mu)]
    cdf = pmf[0]
    k = 0
    while 1.0 - cdf >= tail and k < 1000:
        k += 1
        pmf.append(pmf[-1] * mu / k)
        cdf += pmf[-1]
    cum = np.cumsum(pmf)
    cum[-1] = 1.0
    return cum


@dataclass
class PulseTruth:
    """Hidden per-set counts that the decoy estimators bound."""

    o: dict[str, int]
    s: dict[str, int]
    e: dict[str, int]
    s_K: int
    key_labels: np.ndarray

    @property
    def r_Z(self) -> int:
        return int(np.count_nonzero((self.key_labels == LABEL_X) | (self.key_labels == LABEL_Y)))

    @property
    def r_X(self) -> int:
        return int(np.count_nonzero((self.key_labels == LABEL_Z) | (self.key_labels == LABEL_Y)))

    @property
    def phi_Z(self) -> float:
        return self.r_Z / self.s_K if self.s_K else 0.0

    @property
    def phi_X(self) -> float:
        return self.r_X / self.s_K if self.s_K else 0.0


def single_photon_phase_error(ch: ChannelParams) -> float:
    """Error probability of a detected single photon measured in either basis."""
    c2, s2 = math.cos(ch.delta_mis) ** 2, math.sin(ch.delta_mis) ** 2
    q = ch.p_noise
    pc = 1.0 - (1.0 - q) * (1.0 - ch.eta * c2)
    pw = 1.0 - (1.0 - q) * (1.0 - ch.eta * s2)
    p_out = pc * (1.0 - pw) + pw * (1.0 - pc) + pc * pw
    p_err = pw * (1.0 - pc) + 0.5 * pc * pw
    return p_err / p_out if p_out > 0 else 0.0


def _phase_flip_probs(e1: float, m_Y: float) -> tuple[float, float]:
    """P(phase flip | bit flip) and P(phase flip | no bit flip).

    ``m_Y`` is the fraction of bit flips that also carry a phase flip; the
    second probability keeps the marginal phase-flip rate at ``e1``.
    """
    if e1 <= 0:
        return 0.0, 0.0
    given_no_flip = (e1 - m_Y * e1) / (1.0 - e1)
    return m_Y, min(max(given_no_flip, 0.0), 1.0)


def simulate_pulses(pp: ProtocolParams, ch: ChannelParams, seed: int, index: int = 0,
                    m_Y: float = 0.0) -> tuple[CountTable, PulseTruth]:
    """Send ``pp.N`` pulses through the channel and tally detections.

    Photons leave the source Poisson distributed, are each lost or routed to
    the correct or incorrect detector, and noise clicks are added per
    detector. Double clicks are resolved by a fair coin. Key-set
    single-photon detections get a Pauli label: the bit flip is the observed
    error, the phase flip is drawn so that its rate matches the single-photon
    error rate of the conjugate basis.
    """
    N = int(round(pp.N))
    if N > 10**8:
        raise ValueError("pulse-level simulation is limited to 1e8 pulses")
    if not 0.0 <= m_Y <= 1.0:
        raise ValueError("m_Y must lie in [0, 1]")
    rng = stream(seed, index)
    tables = [poisson_table(mu) for mu in pp.mu]
    c2, s2 = math.cos(ch.delta_mis) ** 2, math.sin(ch.delta_mis) ** 2
    route = np.array([ch.eta * c2, ch.eta * s2, 1.0 - ch.eta])
    route = np.clip(route, 0.0, None)
    route /= route.sum()
    e1 = single_photon_phase_error(ch)
    pz_flip, pz_noflip = _phase_flip_probs(e1, m_Y)
    p_set = np.array([pp.sifting_factor("Z"), pp.sifting_factor("T"), pp.sifting_factor("X")])
    p_set = np.append(p_set, 1.0 - p_set.sum())

    n = {f: np.zeros(3) for f in SETS}
    m = {f: np.zeros(3) for f in SETS}
    o = dict.fromkeys(SETS, 0)
    s = dict.fromkeys(SETS, 0)
    e = dict.fromkeys(SETS, 0)
    key_labels = []

    for start in range(0, N, CHUNK):
        size = min(CHUNK, N - start)
        intensity = rng.choice(3, size=size, p=pp.p_mu)
        u = rng.random(size)
        k = np.empty(size, dtype=np.int64)
        for i, cum in enumerate(tables):
            sel = intensity == i
            k[sel] = np.searchsorted(cum, u[sel], side="right")
        split = rng.multinomial(k, route) if size else np.zeros((0, 3), dtype=np.int64)
        click_c = (split[:, 0] > 0) | (rng.random(size) < ch.p_noise)
        click_w = (split[:, 1] > 0) | (rng.random(size) < ch.p_noise)
        detected = click_c | click_w
        coin = rng.random(size) < 0.5
        error = (click_w & ~click_c) | (click_c & click_w & coin)
        which = rng.choice(4, size=size, p=p_set)
        phase_u = rng.random(size)
        for j, f in enumerate(SETS):
            in_set = detected & (which == j)
            for i in range(3):
                cell = in_set & (intensity == i)
                n[f][i] += np.count_nonzero(cell)
                m[f][i] += np.count_nonzero(cell & error)
            o[f] += int(np.count_nonzero(in_set & (k == 0)))
            single = in_set & (k == 1)
            s[f] += int(np.count_nonzero(single))
            e[f] += int(np.count_nonzero(single & error))
            if f == "Z":
                key = in_set & (intensity < 2)
                labels = np.full(int(np.count_nonzero(key)), NON_SINGLE, dtype=np.int8)
                ks, err, pu = k[key], error[key], phase_u[key]
                one = ks == 1
                phase = np.where(err, pu < pz_flip, pu < pz_noflip)
                labels[one & ~err & ~phase] = LABEL_I
                labels[one & err & ~phase] = LABEL_X
                labels[one & err & phase] = LABEL_Y
                labels[one & ~err & phase] = LABEL_Z
                key_labels.append(labels)

    labels = np.concatenate(key_labels) if key_labels else np.zeros(0, dtype=np.int8)
    truth = PulseTruth(o, s, e, int(np.count_nonzero(labels != NON_SINGLE)), labels)
    return CountTable(n=n, m=m), truth
