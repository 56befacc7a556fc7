"""
Plotly figures for inspecting selections and simulation results.
"""

from typing import Iterable, Optional

import numpy as np
import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
from plotly.graph_objects import Figure


def adjust_fig_layout(fig: Figure) -> Figure:
    """
    Adjusts the layout for a figure. Reduces the top margin of the given figure.

    Arguments:
        fig: Plotly express/plotly go figure to format
    Returns:
        Formatted figure
    """
    fig.update_layout(margin={"t": 20})
    return fig


def plot_similarity_vector(
    plan, relevant: Optional[Iterable[int]] = None, top: Optional[int] = None
) -> Figure:
    """
    Bar chart of the row marginal P1 of a transport plan sorted in descending order, the similarity of every
    pre-training class to the target data.

    x-axis: rank of the pre-training class
    y-axis: [P1]_j

    Arguments:
        plan: TransportPlan
        relevant: optional pre-training class indices to colour differently.
        top: only plot the first top classes.
    Returns:
        plotly go figure
    """
    scores = np.asarray(plan.row_marginal)
    order = np.lexsort((np.arange(len(scores)), -scores))
    if top is not None:
        order = order[:top]
    relevant = set() if relevant is None else set(relevant)
    colors = ["crimson" if int(j) in relevant else "steelblue" for j in order]
    fig = go.Figure(
        go.Bar(
            x=np.arange(1, len(order) + 1),
            y=scores[order],
            marker_color=colors,
            customdata=order,
            hovertemplate="rank %{x}<br>class %{customdata}<br>score %{y:.4g}<extra></extra>",
            name="[P1]",
        )
    )
    fig.update_xaxes(title_text="Rank")
    fig.update_yaxes(title_text="Similarity [P1]")
    return adjust_fig_layout(fig)


def plot_excess_risk(result, every: int = 1) -> Figure:
    """
    Mean excess risk across seeds against the fine-tuning step, with a band of one standard error and the
    theoretical bound as a dashed line when it applies.

    Arguments:
        result: SimResult
        every: plot every n-th step only.
    Returns:
        plotly go figure
    """
    trajectories = result.trajectories[:, ::every]
    steps = np.arange(result.trajectories.shape[1])[::every]
    mean = trajectories.mean(axis=0)
    if trajectories.shape[0] > 1:
        stderr = trajectories.std(axis=0, ddof=1) / np.sqrt(trajectories.shape[0])
    else:
        stderr = np.zeros_like(mean)

    fig = go.Figure()
    fig.add_trace(
        go.Scatter(
            x=np.concatenate([steps, steps[::-1]]),
            y=np.concatenate([mean + stderr, (mean - stderr)[::-1]]),
            fill="toself",
            line=dict(width=0),
            fillcolor="rgba(70, 130, 180, 0.2)",
            hoverinfo="skip",
            name="Standard error",
        )
    )
    fig.add_trace(
        go.Scatter(x=steps, y=mean, line=dict(color="steelblue"), name="Mean excess risk")
    )
    if result.bound.applicable:
        fig.add_trace(
            go.Scatter(
                x=[steps[0], steps[-1]],
                y=[result.bound.value, result.bound.value],
                line=dict(color="red", dash="dash"),
                name="Bound",
            )
        )
    fig.update_xaxes(title_text="Fine-tuning step")
    fig.update_yaxes(title_text="Excess risk", type="log")
    return adjust_fig_layout(fig)


def plot_recall_sensitivity(recalls: pd.DataFrame) -> Figure:
    """
    Recall of UOT selection against the cosine cost scale.

    Arguments:
        recalls: pd dataframe with columns EPSILON_C and RECALL, as returned by selection.recall_by_epsilon_c
    Returns:
        plotly express figure
    """
    fig = px.line(
        recalls.sort_values("EPSILON_C"),
        x="EPSILON_C",
        y="RECALL",
        markers=True,
        log_x=True,
        labels={"EPSILON_C": "Cost scale epsilon_c", "RECALL": "Recall"},
    )
    fig.update_yaxes(range=[0, 1.05])
    return adjust_fig_layout(fig)
