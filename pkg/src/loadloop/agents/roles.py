"""The five pipeline agents: profiles, workflows, action schemas, topic map.

Topic map:
  task_manager          subscribes user.io, task.status   (home task.status, speaks to user.io)
  preparation_assistant subscribes task.prepare           (reports to task.status)
  model_manager         subscribes model.optimize         (reports to task.status)
  model_developer       subscribes model.execute          (reports to model.optimize)
  deployment_operator   subscribes deploy.forecast        (reports to task.status)
"""

from __future__ import annotations

from typing import Callable, Dict, Optional

from .agent import Agent, AgentProfile, ToolDescriptor, ToolParam

TASK_MANAGER = "task_manager"
PREPARATION_ASSISTANT = "preparation_assistant"
MODEL_MANAGER = "model_manager"
MODEL_DEVELOPER = "model_developer"
DEPLOYMENT_OPERATOR = "deployment_operator"

AGENT_IDS = (
    TASK_MANAGER,
    PREPARATION_ASSISTANT,
    MODEL_MANAGER,
    MODEL_DEVELOPER,
    DEPLOYMENT_OPERATOR,
)


def task_manager_profile() -> AgentProfile:
    return AgentProfile(
        agent_id=TASK_MANAGER,
        profile_text=(
            "You are the Task Manager, the central coordinator of the forecasting "
            "workbench. You are the only agent that talks to the human user: you "
            "collect task information, control stage transitions, and shield the "
            "user from internal details."
        ),
        workflow_text=(
            "Stage 1 (preparation): collect the dataset path, forecast interval, "
            "forecast horizon, and metric preferences from the user, then hand off "
            "to the preparation assistant and relay its questions until preparation "
            "completes. Stage 2 (optimization): start the configuration search, "
            "forward user guidance to the model manager, and report progress. "
            "Stage 3 (deployment): trigger deployment, relay postprocessing "
            "requests, and confirm completion to the user."
        ),
        action_schema=(
            ToolDescriptor(
                "send_to_user",
                "Send a message to the human user.",
                (ToolParam("text"),),
            ),
            ToolDescriptor(
                "begin_preparation",
                "Kick off the preparation stage with the collected metadata.",
                (
                    ToolParam("dataset_path"),
                    ToolParam("interval_delta", "integer"),
                    ToolParam("horizon", "integer"),
                ),
            ),
            ToolDescriptor(
                "begin_optimization",
                "Start the configuration search once preparation is done.",
                (),
            ),
            ToolDescriptor(
                "submit_guidance",
                "Forward parsed steering directives to the model manager.",
                (ToolParam("directives_json"),),
            ),
            ToolDescriptor(
                "begin_deployment",
                "Deploy the best configuration and produce a forecast.",
                (),
            ),
        ),
        subscriptions=("user.io", "task.status"),
        home_topic="task.status",
        output_topic="user.io",
    )


def preparation_assistant_profile() -> AgentProfile:
    return AgentProfile(
        agent_id=PREPARATION_ASSISTANT,
        profile_text=(
            "You are the Preparation Assistant. You own the four preparation "
            "steps: task metadata, column semantics, data cleaning, and metric "
            "customization."
        ),
        workflow_text=(
            "Step 1: validate the dataset path and task metadata; if the dataset "
            "cannot be loaded, ask the task manager for a new path. Step 2: load "
            "the dataset and propose column semantics for confirmation. Step 3: "
            "run anomaly detection and imputation, then publish the cleaning "
            "report and data summary. Step 4: record the evaluation metric "
            "choice. Announce completion on the status topic."
        ),
        action_schema=(
            ToolDescriptor(
                "load_dataset",
                "Load a CSV dataset and propose column semantics.",
                (ToolParam("path"),),
            ),
            ToolDescriptor(
                "confirm_semantics",
                "Confirm or override the proposed column roles.",
                (ToolParam("assignments_json"),),
            ),
            ToolDescriptor(
                "define_task",
                "Fix the forecast interval and horizon.",
                (ToolParam("interval_delta", "integer"), ToolParam("horizon", "integer")),
            ),
            ToolDescriptor(
                "clean_data",
                "Run anomaly detection, imputation, and summary statistics.",
                (),
            ),
            ToolDescriptor(
                "set_metric",
                "Record the evaluation metric specification.",
                (ToolParam("metric_json"),),
            ),
        ),
        subscriptions=("task.prepare",),
        home_topic="task.prepare",
        output_topic="task.status",
    )


def model_manager_profile() -> AgentProfile:
    return AgentProfile(
        agent_id=MODEL_MANAGER,
        profile_text=(
            "You are the Model Manager. You plan the configuration search: you "
            "read trial summaries, balance exploration against exploitation, and "
            "translate user guidance into concrete directives for the next batch."
        ),
        workflow_text=(
            "Each iteration: think first, then act. Thinking: compare model-type "
            "performance, check whether the best loss is still improving, and "
            "interpret any user guidance. Acting: either pass the user's "
            "directives through, emit a balancing allocation when a model type is "
            "starved and progress is flat, or leave the optimizer free. Send the "
            "decided trial plan to the model developer."
        ),
        action_schema=(
            ToolDescriptor(
                "propose_strategy",
                "Decide directives for the next batch from the latest summary.",
                (),
            ),
            ToolDescriptor(
                "send_trial_plan",
                "Hand the planned batch to the model developer.",
                (ToolParam("plan_json"),),
            ),
        ),
        subscriptions=("model.optimize",),
        home_topic="model.optimize",
        output_topic="task.status",
    )


def model_developer_profile() -> AgentProfile:
    return AgentProfile(
        agent_id=MODEL_DEVELOPER,
        profile_text=(
            "You are the Model Developer. You execute trial plans: for each "
            "configuration you invoke the feature engineering and training "
            "functions and report the evaluation results."
        ),
        workflow_text=(
            "For every trial plan received: evaluate each configuration with the "
            "unified training interface, collect losses and reports, and send the "
            "results back to the model manager. Never change the plan."
        ),
        action_schema=(
            ToolDescriptor(
                "evaluate_configuration",
                "Train and score one configuration on the validation split.",
                (ToolParam("config_json"),),
            ),
        ),
        subscriptions=("model.execute",),
        home_topic="model.execute",
        output_topic="model.optimize",
    )


def deployment_operator_profile() -> AgentProfile:
    return AgentProfile(
        agent_id=DEPLOYMENT_OPERATOR,
        profile_text=(
            "You are the Deployment Operator. You apply the winning configuration "
            "to fresh data, publish forecasts, and perform user-requested "
            "postprocessing adjustments."
        ),
        workflow_text=(
            "On deployment: retrain the best configuration, generate the forecast "
            "for the requested origin, and present it with its context series. "
            "Apply postprocessing rules in the order requested, log every "
            "adjustment, and report raw versus adjusted metrics when actuals "
            "exist."
        ),
        action_schema=(
            ToolDescriptor(
                "generate_forecast",
                "Produce the raw forecast from the deployed model.",
                (ToolParam("origin_index", "integer", required=False),),
            ),
            ToolDescriptor(
                "apply_postprocess_rule",
                "Apply one forecast-adjustment rule.",
                (ToolParam("rule_json"),),
            ),
        ),
        subscriptions=("deploy.forecast",),
        home_topic="deploy.forecast",
        output_topic="task.status",
    )


PROFILE_BUILDERS = {
    TASK_MANAGER: task_manager_profile,
    PREPARATION_ASSISTANT: preparation_assistant_profile,
    MODEL_MANAGER: model_manager_profile,
    MODEL_DEVELOPER: model_developer_profile,
    DEPLOYMENT_OPERATOR: deployment_operator_profile,
}


def build_agent(agent_id: str, handlers: Optional[Dict[str, Callable]] = None) -> Agent:
    profile = PROFILE_BUILDERS[agent_id]()
    return Agent(profile, handlers or {t.name: _unbound_handler(t.name) for t in profile.action_schema})


def _unbound_handler(name: str) -> Callable[[dict], dict]:
    def handler(arguments: dict) -> dict:
        raise RuntimeError(f"tool {name!r} is not bound to a pipeline")

    return handler
