"""Multi-agent runtime: message pool, agent construction, backends, roles,
guidance interpretation, pipeline orchestration, and token accounting."""

from .agent import (  # noqa: F401
    Agent,
    AgentProfile,
    ToolDescriptor,
    ToolParam,
    assemble_prompt,
    step,
)
from .backend import (  # noqa: F401
    BackendError,
    BackendResponse,
    HTTPChatBackend,
    ScriptRule,
    ScriptedBackend,
    estimate_tokens,
)
from .bus import (  # noqa: F401
    REGISTERED_TOPICS,
    AgentMessage,
    BusError,
    MessagePool,
    ToolCall,
)
from .guidance_parse import default_strategy, parse_guidance  # noqa: F401
from .pipeline import (  # noqa: F401
    Pipeline,
    PipelineConfig,
    PipelineError,
    OptimizeSettings,
    build_pipeline_script,
    restore_pipeline,
    resume_pipeline,
    run_pipeline,
)
from .roles import (  # noqa: F401
    AGENT_IDS,
    DEPLOYMENT_OPERATOR,
    MODEL_DEVELOPER,
    MODEL_MANAGER,
    PREPARATION_ASSISTANT,
    TASK_MANAGER,
    build_agent,
)
from .tokens import TokenLedger  # noqa: F401
