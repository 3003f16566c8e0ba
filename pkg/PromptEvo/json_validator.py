import logging

from jsonschema import Draft7Validator, ValidationError

from .errors import ConfigInvalid

logger = logging.getLogger(__name__)


class JSONValidator:
    @staticmethod
    def validate(data, schema, error_cls=ConfigInvalid, what="JSON"):
        """Validate ``data`` against ``schema``, raising ``error_cls`` on failure.

        The message names the offending path so a bad config key or a broken
        wire reply can be located without a traceback.
        """
        try:
            Draft7Validator(schema).validate(data)
        except ValidationError as e:
            path = ".".join(str(p) for p in e.absolute_path) or "<root>"
            logger.debug("%s validation error at %s: %s", what, path, e.message)
            raise error_cls(f"{what} invalid at {path}: {e.message}") from e
        return data
