from .policy import ANY_ATTEMPTS, DECODE_RTOL, ChunkResult, PolicyMixin  # noqa
