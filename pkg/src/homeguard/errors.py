"""Exception taxonomy shared across the gateway."""


class GatewayError(Exception):
    """Base class for every error this package raises on purpose."""


# --- sensor fleet ---

class DuplicateSensorId(GatewayError):
    pass


class UnknownKind(GatewayError):
    pass


class UnknownSensor(GatewayError):
    pass


class NonMonotonicTime(GatewayError):
    pass


class InvalidScript(GatewayError):
    pass


# --- controller ---

class StoreUnavailable(GatewayError):
    pass


class Unauthorized(GatewayError):
    pass


# --- store ---

class StorageFull(GatewayError):
    pass


class SerializationError(GatewayError):
    pass


class InvalidFilter(GatewayError):
    pass


class UnknownSnapshot(GatewayError):
    pass


# --- auth ---

class AuthError(GatewayError):
    """Base for authentication failures; `code` is the wire-safe reason."""

    code = "auth_error"


class UsernameTaken(AuthError):
    code = "username_taken"


class WeakPassword(AuthError):
    code = "weak_password"


class AuthFailed(AuthError):
    """Uniform bad-credentials error: unknown user and wrong password look identical."""

    code = "auth_failed"


class AccountLocked(AuthError):
    code = "account_locked"


class KeyMismatch(AuthError):
    code = "key_mismatch"


class KeyExhausted(AuthError):
    code = "key_exhausted"


class KeyExpired(AuthError):
    code = "key_expired"


class UnknownLogin(AuthError):
    code = "unknown_login"


class InvalidToken(AuthError):
    """Covers unknown, expired and revoked tokens uniformly."""

    code = "invalid_token"


# --- notify ---

class UnconfiguredChannel(GatewayError):
    pass


# --- nids ---

class SchemaError(GatewayError):
    """CSV input does not match the declared schema.

    Carries the offending 1-based row number and/or column name when known.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        parts = [message]
        if row is not None:
            parts.append(f"row {row}")
        if column is not None:
            parts.append(f"column {column!r}")
        super().__init__(": ".join(parts))
        self.row = row
        self.column = column


# --- cli / config ---

class ConfigError(GatewayError):
    pass


class UsageError(GatewayError):
    pass


class TargetUnreachable(GatewayError):
    pass
