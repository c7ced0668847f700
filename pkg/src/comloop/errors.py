"""Exception hierarchy shared across the engine."""


class ComloopError(Exception):
    """Base class for all engine errors."""


class ConfigError(ComloopError):
    """Invalid run configuration or CLI flags."""


class CommunityError(ComloopError):
    """Malformed community artifacts or illegal store operations."""


class GraphError(CommunityError):
    """Dependency graph invariant violated (cycle, dangling edge, time travel)."""


class BundleError(ComloopError):
    """Competition bundle is missing a component or is structurally broken."""


class GatewayError(ComloopError):
    """Backend transport failure or unmatched scripted request."""


class TemplateError(GatewayError):
    """Prompt template rendered with a missing placeholder."""


class ParseError(GatewayError):
    """Model response did not match the expected tag grammar."""


class SandboxError(ComloopError):
    """Session lifecycle misuse or guest runner failure."""


class AgentError(ComloopError):
    """Agent role could not complete its contract."""


class MetricsError(ComloopError):
    """Leaderboard or run-selection operation on unusable inputs."""
