"""
LangGraph workflow of a simulator run.

This module builds the state graph that drives `run <config>`:
1. Load Config → Simulate → Check → Write Outputs
2. Failures branch to Report Error; flow failures still write their outputs
3. Conditional edges decide on the error field of the run state

Production-grade features:
- Cached compiled graph (singleton pattern)
- Conditional routing based on state
- Type-safe state management
"""

from typing import Literal, Optional

from langgraph.graph import END, StateGraph

from flows.nodes import (
    check_node,
    load_config_node,
    report_error_node,
    simulate_node,
    write_outputs_node,
)
from flows.state import RunState


# Global cache for compiled graph (singleton pattern)
_COMPILED_GRAPH: Optional[StateGraph] = None


def _error(state: RunState) -> str:
    return state.get("error") if isinstance(state, dict) else state.error


def should_continue_after_load(state: RunState) -> Literal["simulate", "report_error"]:
    """
    Conditional edge after loading the configuration.

    Args:
        state: Current run state

    Returns:
        Next node name
    """
    return "report_error" if _error(state) else "simulate"


def should_continue_after_simulation(state: RunState) -> Literal["check", "report_error"]:
    """Conditional edge after the flow run."""
    return "report_error" if _error(state) else "check"


def should_continue_after_error(state: RunState) -> Literal["write_outputs", "end"]:
    """Runs that got past config loading still write their (partial) outputs."""
    run_config = state.get("run_config") if isinstance(state, dict) else state.run_config
    return "end" if run_config is None else "write_outputs"


def build_graph() -> StateGraph:
    """
    Build the run workflow.

    Graph structure:

    START
      ↓
    [Load Config] → (error) → [Report Error] → END
      ↓
    [Simulate] → (error) → [Report Error] ─┐
      ↓                                    │
    [Check]                                │
      ↓                                    │
    [Write Outputs] ←──────────────────────┘
      ↓
    END

    Returns:
        Compiled StateGraph
    """
    workflow = StateGraph(RunState)

    workflow.add_node("load_config", load_config_node)
    workflow.add_node("simulate", simulate_node)
    workflow.add_node("check", check_node)
    workflow.add_node("write_outputs", write_outputs_node)
    workflow.add_node("report_error", report_error_node)

    workflow.set_entry_point("load_config")

    workflow.add_conditional_edges(
        "load_config",
        should_continue_after_load,
        {
            "simulate": "simulate",
            "report_error": "report_error"
        }
    )

    workflow.add_conditional_edges(
        "simulate",
        should_continue_after_simulation,
        {
            "check": "check",
            "report_error": "report_error"
        }
    )

    workflow.add_conditional_edges(
        "report_error",
        should_continue_after_error,
        {
            "write_outputs": "write_outputs",
            "end": END
        }
    )

    workflow.add_edge("check", "write_outputs")
    workflow.add_edge("write_outputs", END)

    return workflow.compile()


def get_compiled_graph() -> StateGraph:
    """
    Get or build the compiled graph (singleton pattern).

    Returns:
        Compiled StateGraph instance
    """
    global _COMPILED_GRAPH

    if _COMPILED_GRAPH is None:
        _COMPILED_GRAPH = build_graph()

    return _COMPILED_GRAPH


def clear_graph_cache():
    """
    Clear cached graph (useful for testing).
    """
    global _COMPILED_GRAPH
    _COMPILED_GRAPH = None


def run_pipeline(config_path: str, out_dir: Optional[str] = None, seed_override: Optional[int] = None,
                 quiet: bool = False) -> RunState:
    """
    Run a simulation described by a config file.

    Args:
        config_path: Path of the run configuration
        out_dir: Output directory override
        seed_override: Replaces initial.seed
        quiet: Suppress progress output

    Returns:
        Final run state; exit_code holds the process exit code
    """
    graph = get_compiled_graph()

    initial_state = RunState(config_path=config_path, out_dir=out_dir, seed_override=seed_override, quiet=quiet)

    final_state = graph.invoke(initial_state.model_dump())

    return RunState(**final_state)
