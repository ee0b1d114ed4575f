"""Figures written next to the tabular output of the CLI."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (5.5, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _col(rows, key):
    return np.array([np.nan if r.get(key) is None else float(r[key]) for r in rows])


def _loglog(ax, rows, x, ys, labels):
    for y, lab in zip(ys, labels):
        ax.loglog(_col(rows, x), _col(rows, y), "o-", label=lab)
    ax.set_xlabel(x)
    ax.legend()


def render(command, rows, summary, path):
    """Draw the command's headline quantity; returns the path written."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        if command == "zn":
            ax.plot(_col(rows, "N"), _col(rows, "log_zn"), "o-")
            ax.set_xlabel("N")
            ax.set_ylabel("log Z_N")
        elif command == "approx-scan":
            _loglog(ax, rows, "N", ["scaled_sup", "scaled_T"], ["scaled sup error", "scaled L1 bound"])
        elif command == "entropy":
            N = _col(rows, "N")
            ax.semilogx(N, _col(rows, "H_over_N"), "o-", label="H_N / N")
            ax.axhline(_col(rows, "H_over_N_limit")[0], ls="--", color="k", label="limit")
            ax.set_xlabel("N")
            ax.legend()
        elif command == "production":
            ax.errorbar(_col(rows, "N"), _col(rows, "pairing"), yerr=_col(rows, "pairing_se"), fmt="o-")
            ax.set_xscale("log")
            ax.set_xlabel("N")
            ax.set_ylabel("D_N / N")
        elif command == "gamma":
            N = _col(rows, "N")
            g = _col(rows, "gamma_upper_witness")
            ax.loglog(N, g, "o-", label="witness")
            slope = (summary or {}).get("target_slope_gamma")
            if slope is not None and np.isfinite(g[0]):
                ax.loglog(N, g[0] * (N / N[0]) ** slope, "--", label=f"slope {slope:.3f}")
            ax.set_xlabel("N")
            ax.legend()
        elif command == "walk":
            t = _col(rows, "time")
            for key in ("mean_v4", "v1_4"):
                if key in rows[0]:
                    ax.plot(t, _col(rows, key), lw=0.8, label=key)
            oracle = (summary or {}).get("oracle_mean_v4")
            if oracle is not None:
                ax.axhline(oracle, color="k", ls="--", label="sphere oracle")
            ax.set_xlabel("time")
            ax.legend()
        elif command == "fubini-check":
            x = np.arange(len(rows))
            ax.errorbar(x - 0.1, _col(rows, "lhs"), yerr=3 * _col(rows, "lhs_se"), fmt="o", label="sphere MC")
            ax.errorbar(x + 0.1, _col(rows, "rhs"), yerr=3 * _col(rows, "rhs_se"), fmt="s", label="marginal MC")
            ax.set_xticks(x, [r["test_fn"] for r in rows])
            ax.legend()
        elif command == "validate":
            names = [r["check"] for r in rows]
            vals = [0.0 if r.get("violations") in (None, "") else float(r["violations"]) for r in rows]
            ax.bar(range(len(rows)), vals)
            ax.set_xticks(range(len(rows)), names, rotation=30, ha="right")
            ax.set_ylabel("violations")
        else:
            plt.close(fig)
            raise ValueError(f"no figure for {command!r}")
        ax.set_title(command)
        fig.savefig(path)
        plt.close(fig)
    return path
