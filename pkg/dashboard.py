"""Read-only viewer for a results directory.

    streamlit run dashboard.py -- results/bench
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import streamlit as st

from pose_align.config import CONTROLLER_LABELS, RESULTS_DIR
from pose_align.report import load_results
from pose_align.utils import setup_logging

setup_logging()

st.set_page_config(
    page_title="Alignment Results",
    page_icon="🎯",
    layout="wide",
    initial_sidebar_state="expanded"
)


def results_dir_from_argv() -> Path:
    args = [a for a in sys.argv[1:] if not a.startswith("-")]
    return Path(args[0]) if args else RESULTS_DIR / "bench"


def display_summary(summary: pd.DataFrame, report_text):
    st.header("📋 Benchmark Summary")
    if summary.empty:
        st.info("No trial summaries found.")
        return

    col1, col2, col3 = st.columns(3)
    with col1:
        st.metric("Trials", len(summary))
    with col2:
        st.metric("Converged", f"{int(summary['converged'].sum())} / {len(summary)}")
    with col3:
        st.metric("Conditions", summary["condition"].nunique() if "condition" in summary else 1)

    if report_text:
        st.subheader("Comparison")
        st.code(report_text, language=None)

    with st.expander("All trials"):
        st.dataframe(summary, use_container_width=True)


def display_trial(bundle, stem: str):
    record = bundle.load_trial(stem)
    rows = record.rows
    s = record.summary
    st.header(f"📈 {stem}")

    cols = st.columns(4)
    with cols[0]:
        st.metric("Controller", CONTROLLER_LABELS.get(record.controller, record.controller or "?"))
    with cols[1]:
        st.metric("Duration (s)", "n/a" if not s.converged else f"{s.duration_s:.1f}")
    with cols[2]:
        st.metric("Final Δd (mm)", f"{s.final_dd_mm:.2f}")
    with cols[3]:
        st.metric("Final Δθ (deg)", f"{s.final_dtheta_deg:.2f}")

    shape = st.columns(3)
    with shape[0]:
        st.metric("Path (mm)", f"{s.path_length_mm:.0f}")
    with shape[1]:
        st.metric("Curvature (deg/mm)", f"{s.curvature_deg_per_mm:.3f}")
    with shape[2]:
        st.metric("Oscillations", s.oscillations)

    st.subheader("Alignment error")
    errors = pd.DataFrame({
        "Δd (mm)": rows["dd_mm"].to_numpy(),
        "Δθ (deg)": np.degrees(rows["dtheta_rad"].to_numpy()),
    }, index=rows["t"])
    st.line_chart(errors)

    st.subheader("Raw vs clamped speed")
    speeds = pd.DataFrame({
        "raw |v|": np.linalg.norm(rows[["vraw_x", "vraw_y", "vraw_z"]].to_numpy(), axis=1),
        "clamped |v|": np.linalg.norm(rows[["vc_x", "vc_y", "vc_z"]].to_numpy(), axis=1),
        "smoothed |v|": np.linalg.norm(rows[["vs_x", "vs_y", "vs_z"]].to_numpy(), axis=1),
    }, index=rows["t"])
    st.line_chart(speeds)

    if rows["hold"].any():
        st.caption(f"Zero-hold active on {int(rows['hold'].sum())} logged ticks")


def main():
    """Main function to run the viewer."""
    st.title("🎯 End-Effector Alignment Results")
    directory = results_dir_from_argv()

    try:
        bundle = load_results(directory)
    except FileNotFoundError as e:
        st.error(str(e))
        return

    with st.sidebar:
        st.header("Trial Selection")
        st.caption(str(directory))
        stems = sorted(bundle.logs)
        selected = st.selectbox("Trial log", stems) if stems else None
        st.markdown("---")
        st.markdown("### About")
        st.markdown("Viewer for logs written by `align run` and `align bench`. "
                    "It does not start or steer trials.")

    display_summary(bundle.summary, bundle.report_text)
    if selected:
        display_trial(bundle, selected)


if __name__ == "__main__":
    main()
