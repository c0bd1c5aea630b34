# Shared utilities: logging, config files, validation, worker pool
