import logging
import logging.config

from eliot import add_destinations

# eliot actions are routed into the stdlib logging tree under this name.
actions_logger = logging.getLogger("quditport.actions")
add_destinations(actions_logger.debug)


def configure_logging(logging_config=None, log_level=None):
    if logging_config is not None:
        logging.config.dictConfig(logging_config)

    if log_level is not None:
        logger = logging.getLogger("quditport")
        logger.setLevel(log_level)
        if not logger.handlers and not logging.getLogger().handlers:
            logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
