#!/usr/bin/env python3
"""
Streamlit UI for the Solver Bench
Read-only browser over bench output directories: the comparison table,
error-vs-iteration traces and iterations-vs-omega curves.

    streamlit run streamlit_ui.py -- --root results
"""

import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

# --- Optional .env loader (safe if python-dotenv isn't installed) ---
try:
    if os.path.exists(".env"):
        from dotenv import load_dotenv  # type: ignore
        load_dotenv()
except Exception:
    pass

sys.path.insert(0, ".")

from bench import REPORT_COLUMNS  # noqa: E402
from field_io import read_snapshot  # noqa: E402

CSS = """
<style>
    .main-header {
        font-size: 2.3rem;
        font-weight: bold;
        color: #2c3e50;
        text-align: center;
        margin-bottom: 1.5rem;
    }
    .run-info {
        background-color: #ecf0f1;
        padding: 1rem;
        border-radius: 0.5rem;
        margin: 1rem 0;
        border: 1px solid #bdc3c7;
        color: #2c3e50;
    }
</style>
"""


# -----------------------------
#           Loaders
# -----------------------------

def list_runs(root: str) -> List[Path]:
    """Directories under root (root included) that hold a report, a sweep or final fields."""
    base = Path(root)
    if not base.is_dir():
        return []
    found = [p.parent for p in base.rglob("report.csv")]
    found += [p.parent for p in base.rglob("p.csv")]
    found += [p.parent for p in base.rglob("omega_sweep_*.csv")]
    return sorted(set(found))


def load_report(run: Path) -> pd.DataFrame:
    path = Path(run) / "report.csv"
    if not path.exists():
        return pd.DataFrame(columns=list(REPORT_COLUMNS))
    df = pd.read_csv(path)
    df["converged"] = df["converged"].astype(str) == "True"
    return df


def load_traces(run: Path) -> Dict[str, pd.DataFrame]:
    """Trace CSVs keyed by 'method w=omega'."""
    traces = {}
    for path in sorted(Path(run).glob("trace_*.csv")):
        label = path.stem[len("trace_"):].replace("_w", " w=")
        traces[label] = pd.read_csv(path)
    return traces


def load_sweeps(run: Path) -> Dict[str, pd.DataFrame]:
    return {p.stem[len("omega_sweep_"):]: pd.read_csv(p) for p in sorted(Path(run).glob("omega_sweep_*.csv"))}


def error_table(traces: Dict[str, pd.DataFrame], column: str = "error") -> pd.DataFrame:
    """One log10 column per trace, indexed by iteration."""
    frames = []
    for label, df in traces.items():
        values = np.log10(np.clip(df[column].to_numpy(dtype=float), 1e-300, None))
        frames.append(pd.Series(values, index=df["iteration"], name=label))
    return pd.concat(frames, axis=1) if frames else pd.DataFrame()


def sweep_table(sweeps: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    frames = [df.set_index("omega")["iterations"].rename(name) for name, df in sweeps.items()]
    return pd.concat(frames, axis=1) if frames else pd.DataFrame()


def load_field(run: Path, name: str) -> Optional[np.ndarray]:
    path = Path(run) / f"{name}.csv"
    return read_snapshot(path) if path.exists() else None


# -----------------------------
#            Layout
# -----------------------------

def initialize_session_state(st, root: str):
    if "root" not in st.session_state:
        st.session_state.root = root
    if "trace_column" not in st.session_state:
        st.session_state.trace_column = "error"


def display_header(st):
    st.markdown('<h1 class="main-header">🧮 Pressure Solver Bench</h1>', unsafe_allow_html=True)
    st.markdown("""
    <div class="run-info">
        <ul>
            <li><strong>Report:</strong> iterations, work units and median wall clock per method</li>
            <li><strong>Traces:</strong> convergence history, log10 scale</li>
            <li><strong>Sweeps:</strong> iterations against the relaxation parameter</li>
        </ul>
    </div>
    """, unsafe_allow_html=True)


def display_sidebar(st) -> Optional[Path]:
    with st.sidebar:
        st.header("⚙️ Results")
        st.session_state.root = st.text_input("Results directory", value=st.session_state.root)
        runs = list_runs(st.session_state.root)
        if not runs:
            st.warning("No bench or run output found")
            return None
        run = st.selectbox("Run", runs, format_func=str)
        st.session_state.trace_column = st.radio("Trace column", ["error", "residual_l2"])
        return run


def main(root: str = "results"):
    import streamlit as st

    st.set_page_config(page_title="Pressure Solver Bench", page_icon="🧮", layout="wide")
    st.markdown(CSS, unsafe_allow_html=True)
    initialize_session_state(st, root)
    display_header(st)
    run = display_sidebar(st)
    if run is None:
        return

    report = load_report(run)
    if not report.empty:
        st.subheader("📊 Comparison")
        st.dataframe(report, use_container_width=True)

    traces = load_traces(run)
    if traces:
        st.subheader(f"📉 log10 {st.session_state.trace_column} vs iteration")
        st.line_chart(error_table(traces, st.session_state.trace_column))

    sweeps = load_sweeps(run)
    if sweeps:
        st.subheader("🔁 Iterations vs relaxation parameter")
        st.line_chart(sweep_table(sweeps))

    for name in ("u", "v", "p", "stream", "vorticity"):
        field = load_field(run, name)
        if field is not None:
            with st.expander(f"🗺️ {name} ({field.shape[0]}x{field.shape[1]})"):
                st.dataframe(pd.DataFrame(field.T[::-1]))


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Solver bench report viewer")
    parser.add_argument("--root", default=os.getenv("NSBENCH_OUT_DIR", "results"))
    args, _ = parser.parse_known_args()
    main(args.root)
