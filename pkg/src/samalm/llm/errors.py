class GatewayError(RuntimeError):
    """Base class for completion failures."""

    transient = False


class HttpTimeout(GatewayError):
    transient = True


class HttpStatus(GatewayError):
    def __init__(self, code: int, body: str = ""):
        super().__init__(f"HTTP {code}: {body[:200]}")
        self.code = code
        self.body = body
        self.transient = code >= 500


class RateLimited(HttpStatus):
    def __init__(self, body: str = ""):
        super().__init__(429, body)
        self.transient = True


class ProtocolError(GatewayError):
    """Response was not a well-formed chat completion."""

    transient = True


class ReplayMiss(GatewayError):
    def __init__(self, key: str):
        super().__init__(f"no recorded completion for key {key}")
        self.key = key
