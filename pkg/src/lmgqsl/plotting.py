"""Figures rendered next to the output tables, one PNG per command."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 6.0

params = {
    "axes.labelsize": 11,
    "font.size": 10,
    "font.family": "DejaVu Sans",
    "mathtext.fontset": "dejavusans",
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "figure.figsize": (fig_width, fig_width * golden_mean),
    "figure.dpi": 100,
    "lines.linewidth": 1.0,
    "savefig.dpi": 150,
}

EVEN_STYLE = dict(color="tab:green", ls="-.", lw=0.7)
ODD_STYLE = dict(color="tab:blue", ls="-", lw=0.7)
CRITICAL_STYLE = dict(color="tab:red", lw=2.0)


def _save(fig, path) -> None:
    # no Software/date chunks, so reruns give identical bytes
    fig.savefig(path, format="png", bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)


def _cols(table, *names):
    return [table.column(n) for n in names]


def spectrum(tables, path, levels=(10, 20)) -> None:
    curv = tables["curvature"]
    alpha, parity, level, energy = _cols(tables["levels"], "alpha", "parity", "level", "energy")
    with plt.rc_context(params):
        fig, ax = plt.subplots(figsize=(fig_width, fig_width * 0.8))
        for p, style in ((-1, ODD_STYLE), (1, EVEN_STYLE)):
            sel = parity == p
            for n in np.unique(level[sel]):
                m = sel & (level == n)
                ax.plot(alpha[m], energy[m], **style)
        ax.axhline(0.0, **CRITICAL_STYLE)
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel(r"$E_n$")

        inset = ax.inset_axes([0.08, 0.58, 0.38, 0.36])
        ca, cp, cl, cv = _cols(curv, "alpha", "parity", "level", "curvature")
        for n in levels:
            m = (cp == 0) & (cl == n)
            inset.plot(ca[m], cv[m], label=f"n={n}")
        inset.set_xlabel(r"$\alpha$", fontsize=8)
        inset.set_ylabel(r"$\partial^2 E_n/\partial\alpha^2$", fontsize=8)
        inset.tick_params(labelsize=7)
        inset.legend(fontsize=7)
        _save(fig, path)


def dos(tables, path, **_) -> None:
    hist, cl = tables["histogram"], tables["classical"]
    with plt.rc_context(params):
        fig, (a, b) = plt.subplots(1, 2, figsize=(fig_width * 1.4, fig_width * 0.55))
        e, d = _cols(hist, "energy", "density_normalized")
        a.bar(e, d, width=e[1] - e[0], color="0.6", edgecolor="0.3", lw=0.3)
        a.set_title("quantum", fontsize=9)
        e, d = _cols(cl, "energy", "density_normalized")
        b.plot(e, d, color="k")
        b.set_title("semiclassical", fontsize=9)
        for ax in (a, b):
            ax.axvline(0.0, color="tab:red", lw=0.8, ls=":")
            ax.set_xlabel(r"$E$")
        a.set_ylabel(r"$\rho(E)$ (normalized)")
        _save(fig, path)


def quench(tables, path, **_) -> None:
    lv, series = tables["levels"], tables["series"]
    with plt.rc_context(params):
        fig, (a, b) = plt.subplots(1, 2, figsize=(fig_width * 1.4, fig_width * 0.55))
        e, wa = _cols(lv, "energy", "weighted")
        a.vlines(e, 0.0, wa, color="tab:blue", lw=0.8)
        a.axhline(0.0, color="k", lw=0.5)
        a.set_xlabel(r"$E_n$")
        a.set_ylabel(r"$\mathcal{A}(E)$")
        t, r = _cols(series, "t", "rate")
        b.plot(t, r, color="tab:purple", lw=0.6)
        b.set_xlabel(r"$t$")
        b.set_ylabel(r"$|\partial_t \mathcal{M}(t)|$")
        _save(fig, path)


def _scan(table, x, y, ylabel, path, mark=None) -> None:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        xs, ys = _cols(table, x, y)
        ax.plot(xs, ys, color="k")
        if mark is not None:
            ax.axvline(mark, color="tab:green", ls=":")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(ylabel)
        _save(fig, path)


def qsl_scan(tables, path, mark=None) -> None:
    _scan(tables["scan"], "lambda", "tau_qsl", r"$\tau_{QSL}$", path, mark)


def nm_scan(tables, path, mark=None) -> None:
    _scan(tables["scan"], "lambda", "nm", r"$\mathcal{N}$", path, mark)


def scaling(tables, path, **_) -> None:
    tab, fit = tables["tau_qsl"], tables["fit"]
    n, gap = _cols(tab, "N", "one_minus_tau")
    mu, icpt = fit.column("mu")[0], fit.column("intercept")[0]
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.loglog(n, gap, "o", color="k", ms=4)
        ax.loglog(n, np.exp(icpt) * n ** (-mu), color="tab:red", label=rf"$\mu={mu:.3f}$")
        ax.set_xlabel(r"$N$")
        ax.set_ylabel(r"$1-\tau_{QSL}(\lambda_c)$")
        ax.legend()
        _save(fig, path)


def critical_locus(tables, path, **_) -> None:
    a, num, ana = _cols(tables["locus"], "alpha", "lambda_c_numeric", "lambda_c_analytic")
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(a, ana, color="tab:red", label="analytic")
        ax.plot(a, num, "o", color="k", ms=4, label="numeric")
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel(r"$\lambda_c$")
        ax.legend()
        _save(fig, path)


def heatmap(tables, path, **_) -> None:
    tau, lam, val = _cols(tables["tau_qsl"], "tau_e", "lambda", "tau_qsl")
    taus, lams = np.unique(tau), np.unique(lam)
    grid = val.reshape(len(taus), len(lams))
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(lams, taus, grid, shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label=r"$\tau_{QSL}$")
        ax.set_xlabel(r"$\lambda$")
        ax.set_ylabel(r"$\tau_e$")
        _save(fig, path)


RENDERERS = {
    "spectrum": spectrum,
    "dos": dos,
    "quench": quench,
    "qsl-scan": qsl_scan,
    "scaling": scaling,
    "critical-locus": critical_locus,
    "heatmap": heatmap,
    "nm-scan": nm_scan,
}
