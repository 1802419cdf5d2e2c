import logging
import os

log_level = os.getenv("LOG_LEVEL", "INFO").upper()

log_dir = os.getenv("LOG_DIR")


logger = logging.getLogger(__name__)
logger.setLevel(log_level)

# Create formatter and add it to the handlers
formatter = logging.Formatter(
    "%(asctime)s - %(filename)s:%(funcName)s:%(lineno)d - %(levelname)s - %(message)s"
)

# Console handler writes to stderr; stdout is reserved for reports
console_handler = logging.StreamHandler()
console_handler.setLevel(log_level)
console_handler.setFormatter(formatter)
logger.addHandler(console_handler)

if log_dir:
    os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.FileHandler(os.path.join(log_dir, "app.log"))
    file_handler.setLevel(log_level)
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)
