"""The four specialist agents: prompt rendering, endpoint calls with retry,
artifact extraction from responses, and token/cost accounting."""

from __future__ import annotations

import logging
import math
import re
import time
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .transport import AuthError, TransientTransportError, TransportResponse

logger = logging.getLogger(__name__)


class AgentError(Exception):
    pass


class UnboundPlaceholder(AgentError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"template placeholder {{{name}}} has no binding")


class NoWrapperName(AgentError):
    def __init__(self):
        super().__init__("no <name_optimized> wrapper declaration in response")


class NoCodeBlock(AgentError):
    def __init__(self):
        super().__init__("no fenced code block in response")


class MissingKernelSymbol(AgentError):
    def __init__(self):
        super().__init__("code contains no *_kernel_optimized symbol")


class MultiLineCommand(AgentError):
    def __init__(self):
        super().__init__("compile command spans multiple lines")


class NotNvcc(AgentError):
    def __init__(self, head: str):
        super().__init__(f"compile command must start with nvcc, got {head!r}")


class EmptyCommand(AgentError):
    def __init__(self):
        super().__init__("compile command is empty")


class SuspiciousToken(AgentError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"compile command token {token!r} carries shell metacharacters")


class EmptyResponse(AgentError):
    pass


class TransportExhausted(AgentError):
    def __init__(self, attempts: int, last: Exception):
        self.attempts = attempts
        super().__init__(f"transport failed {attempts} times; last error: {last}")


class AgentRole(Enum):
    PLANNER = "planner"
    CODER = "coder"
    COMPILER = "compiler"
    DEBUGGER = "debugger"


_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


def _template_text(name: str) -> str:
    return (
        resources.files("cudapilot")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
    )


_TEMPLATE_CACHE: dict[str, tuple[str, str]] = {}


def templates_for(role: AgentRole) -> tuple[str, str]:
    if role.value not in _TEMPLATE_CACHE:
        _TEMPLATE_CACHE[role.value] = (
            _template_text(f"{role.value}_system"),
            _template_text(f"{role.value}_user"),
        )
    return _TEMPLATE_CACHE[role.value]


def _substitute(template: str, bindings: dict[str, str], used: set[str]) -> str:
    def repl(match: re.Match) -> str:
        name = match.group(1)
        if name not in bindings:
            raise UnboundPlaceholder(name)
        used.add(name)
        return str(bindings[name])

    return _PLACEHOLDER_RE.sub(repl, template)


def render_prompt(role: AgentRole, bindings: dict[str, str]) -> tuple[str, str]:
    """Substitute {placeholder} sites in the role's templates, byte-exact
    otherwise.  Unknown binding keys are logged, not fatal."""
    system_tpl, user_tpl = templates_for(role)
    used: set[str] = set()
    system_text = _substitute(system_tpl, bindings, used)
    user_text = _substitute(user_tpl, bindings, used)
    for extra in sorted(set(bindings) - used):
        logger.warning(
            "unknown placeholder binding %r ignored for %s", extra, role.value
        )
    return system_text, user_text


@dataclass(frozen=True)
class ModelPricing:
    input_per_token: float = 0.0
    output_per_token: float = 0.0

    @classmethod
    def per_million(cls, input_usd: float, output_usd: float) -> "ModelPricing":
        return cls(input_usd / 1e6, output_usd / 1e6)


@dataclass(frozen=True)
class ChatSettings:
    model: str = "mock-model"
    temperature: float = 0.2
    max_retries: int = 3
    backoff_base: float = 1.0
    pricing: ModelPricing = ModelPricing()


@dataclass(frozen=True)
class ChatExchange:
    role: AgentRole
    system_text: str
    user_text: str
    response_text: str
    prompt_tokens: int
    completion_tokens: int
    cost_usd: float
    attempt: int


def estimate_tokens(text: str) -> int:
    """Documented fallback when the endpoint reports no usage: ceil(chars/4)."""
    return math.ceil(len(text) / 4)


def chat(
    role: AgentRole,
    system_text: str,
    user_text: str,
    transport,
    settings: ChatSettings,
    sleep=time.sleep,
) -> tuple[ChatExchange, TransportResponse]:
    """One completion with exponential backoff on transient failures.

    Up to ``max_retries`` retries after the first attempt; usage is taken
    from the endpoint's report or estimated per side when absent.  Returns
    the accounted exchange plus the raw response (for tool-call payloads).
    """
    last_error: Exception | None = None
    attempts = settings.max_retries + 1
    for attempt in range(1, attempts + 1):
        try:
            response: TransportResponse = transport.send(
                role.value, system_text, user_text, settings.model, settings.temperature
            )
        except AuthError:
            raise
        except TransientTransportError as exc:
            last_error = exc
            if attempt < attempts:
                sleep(settings.backoff_base * 2 ** (attempt - 1))
            continue
        if not response.text.strip() and not response.tool_calls:
            raise EmptyResponse(f"{role.value} returned an empty completion")
        prompt_tokens = response.prompt_tokens
        if prompt_tokens is None:
            prompt_tokens = estimate_tokens(system_text) + estimate_tokens(user_text)
        completion_tokens = response.completion_tokens
        if completion_tokens is None:
            completion_tokens = estimate_tokens(response.text)
        cost = (
            prompt_tokens * settings.pricing.input_per_token
            + completion_tokens * settings.pricing.output_per_token
        )
        exchange = ChatExchange(
            role=role,
            system_text=system_text,
            user_text=user_text,
            response_text=response.text,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
            cost_usd=cost,
            attempt=attempt,
        )
        return exchange, response
    raise TransportExhausted(attempts, last_error)


_IDENT_OPTIMIZED_RE = re.compile(r"<([A-Za-z_][A-Za-z0-9_]*_optimized)>")
_KERNEL_SYMBOL_RE = re.compile(r"\b\w+_kernel_optimized\b")
_FENCE_RE = re.compile(r"```[A-Za-z0-9_+-]*\n(.*?)```", re.DOTALL)

# Executed without a shell; any token carrying these is rejected outright.
SHELL_METACHARACTERS = set(";|&$()`<>\n\r")


def extract_wrapper_name(response_text: str) -> str:
    """Last <...> group holding a C identifier that ends in _optimized."""
    matches = _IDENT_OPTIMIZED_RE.findall(response_text)
    if not matches:
        raise NoWrapperName()
    return matches[-1]


def extract_code_block(response_text: str) -> str:
    """Largest fenced code block; the fallback path when the endpoint has no
    native file-writing tool protocol."""
    blocks = _FENCE_RE.findall(response_text)
    if not blocks:
        raise NoCodeBlock()
    return max(blocks, key=len)


def extract_compile_command(response_text: str) -> str:
    """Single-line nvcc command, stripped of fences; rejects anything that
    could smuggle shell syntax past the argv-only execution path."""
    text = response_text.strip()
    fenced = _FENCE_RE.findall(text + ("\n" if not text.endswith("\n") else ""))
    if fenced:
        text = max(fenced, key=len).strip()
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise EmptyCommand()
    if len(lines) > 1:
        raise MultiLineCommand()
    command = lines[0]
    tokens = command.split()
    if tokens[0] != "nvcc":
        raise NotNvcc(tokens[0])
    for token in tokens:
        if set(token) & SHELL_METACHARACTERS:
            raise SuspiciousToken(token)
    return command


def command_argv(command: str) -> list[str]:
    """Whitespace-split argv for no-shell execution."""
    return command.split()


@dataclass(frozen=True)
class CodeWrite:
    dst_path: str
    content: str
    wrapper_name: str

    def __post_init__(self):
        if not self.wrapper_name.endswith("_optimized"):
            raise NoWrapperName()
        if not _KERNEL_SYMBOL_RE.search(self.content):
            raise MissingKernelSymbol()


def build_code_write(response: TransportResponse, dst_path: str) -> CodeWrite:
    """Turn a coder response into a file write.

    A native write_file tool call wins; otherwise the largest fenced block
    is the file content.  Both paths yield the same CodeWrite shape.
    """
    content = None
    for call in response.tool_calls:
        if call.name == "write_file":
            content = str(call.arguments.get("content", ""))
            break
    if content is None:
        content = extract_code_block(response.text)
    wrapper = extract_wrapper_name(response.text)
    return CodeWrite(dst_path=dst_path, content=content, wrapper_name=wrapper)


@dataclass(frozen=True)
class RoleUsage:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_usd: float = 0.0

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class UsageTotals:
    total_tokens: int
    total_cost_usd: float
    per_role: dict[str, RoleUsage]

    def to_dict(self) -> dict:
        return {
            "total_tokens": self.total_tokens,
            "total_cost_usd": self.total_cost_usd,
            "per_role": {
                role: {
                    "calls": usage.calls,
                    "prompt_tokens": usage.prompt_tokens,
                    "completion_tokens": usage.completion_tokens,
                    "tokens": usage.tokens,
                    "cost_usd": usage.cost_usd,
                }
                for role, usage in sorted(self.per_role.items())
            },
        }


def accumulate_usage(exchanges: list[ChatExchange]) -> UsageTotals:
    """Sum tokens and cost, with a per-role breakdown (associative under
    list concatenation)."""
    total_tokens = 0
    total_cost = 0.0
    per_role: dict[str, RoleUsage] = {}
    for exchange in exchanges:
        total_tokens += exchange.prompt_tokens + exchange.completion_tokens
        total_cost += exchange.cost_usd
        prev = per_role.get(exchange.role.value, RoleUsage())
        per_role[exchange.role.value] = RoleUsage(
            calls=prev.calls + 1,
            prompt_tokens=prev.prompt_tokens + exchange.prompt_tokens,
            completion_tokens=prev.completion_tokens + exchange.completion_tokens,
            cost_usd=prev.cost_usd + exchange.cost_usd,
        )
    return UsageTotals(
        total_tokens=total_tokens, total_cost_usd=total_cost, per_role=per_role
    )


class AgentClient:
    """Binds a transport, chat settings and the hardware-info blurb; the
    pipeline talks to agents exclusively through this."""

    def __init__(self, transport, settings: ChatSettings, hardware_info: str):
        self.transport = transport
        self.settings = settings
        self.hardware_info = hardware_info

    def run(
        self, role: AgentRole, bindings: dict[str, str], sleep=time.sleep
    ) -> tuple[ChatExchange, TransportResponse]:
        full = dict(bindings)
        full.setdefault("info", self.hardware_info)
        system_text, user_text = render_prompt(role, full)
        return chat(role, system_text, user_text, self.transport, self.settings, sleep)
