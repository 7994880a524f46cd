"""
drkdv Configuration
Truncation depths, verification limits, logging and output settings
"""
import json
import os
import logging
import sys
from typing import List, Optional, Tuple

from core.ring import TruncationContext

TRUNCATION_CONFIG = {
    'eps_max': 4,
    'deg_max': 8,
    'd_max': 2,

    # used by kdv, xikdv, commute, ... when --eps / --deg are not given
    'cli_eps_max': 6,
    'cli_deg_max': 8,
}

VERIFICATION_CONFIG = {
    'check_timeout': 600,
    'fail_fast': False,
    'monitor_memory': True,
    'include_xi0_branch': True,
}

LOGGING_CONFIG = {
    'level': 'WARNING',
    'format': '[%(asctime)s] %(levelname)s:%(name)s: %(message)s',
    'file_path': 'logs/drkdv.log',
    'max_file_size_mb': 20,
    'backup_count': 3,
    'enable_console': True,
    'enable_file': False,
}

OUTPUT_CONFIG = {
    'json_indent': 2,
}

SECTIONS = ('truncation', 'verification', 'logging', 'output')


class DRKdVConfig:
    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file
        self.truncation = TRUNCATION_CONFIG.copy()
        self.verification = VERIFICATION_CONFIG.copy()
        self.logging = LOGGING_CONFIG.copy()
        self.output = OUTPUT_CONFIG.copy()
        self.invalid_keys: List[Tuple[str, str]] = []

        if config_file and os.path.exists(config_file):
            self.load_from_file(config_file)
        elif config_file:
            logging.warning(f"Config file not found: {config_file}")

        self.apply_env_overrides()

    def load_from_file(self, config_file: str):
        """Load configuration from JSON file"""
        try:
            with open(config_file, 'r') as f:
                config_data = json.load(f)

            for section_name, section_config in config_data.items():
                if section_name in SECTIONS:
                    getattr(self, section_name).update(section_config)
                else:
                    logging.warning(f"Ignoring unknown config section '{section_name}' in {config_file}")

        except Exception as e:
            logging.error(f"Failed to load config from {config_file}: {e}")

    def apply_env_overrides(self):
        """Apply environment variable overrides"""
        env_mappings = {
            'DRKDV_EPS_MAX': ('truncation', 'eps_max', int),
            'DRKDV_DEG_MAX': ('truncation', 'deg_max', int),
            'DRKDV_D_MAX': ('truncation', 'd_max', int),
            'DRKDV_LOG_LEVEL': ('logging', 'level', str),
            'DRKDV_LOG_FILE': ('logging', 'file_path', str),
            'DRKDV_CHECK_TIMEOUT': ('verification', 'check_timeout', float),
            'DRKDV_FAIL_FAST': ('verification', 'fail_fast', bool),
            'DRKDV_JSON_INDENT': ('output', 'json_indent', int),
        }

        for env_var, (section, key, type_func) in env_mappings.items():
            value = os.getenv(env_var)
            if value is not None:
                try:
                    if type_func == bool:
                        value = value.lower() in ('true', '1', 'yes', 'on')
                    else:
                        value = type_func(value)
                    getattr(self, section)[key] = value
                    if env_var == 'DRKDV_LOG_FILE':
                        self.logging['enable_file'] = True
                except (ValueError, TypeError) as e:
                    logging.warning(f"Invalid value for {env_var}: {value} ({e})")

    def save_to_file(self, config_file: str):
        """Save current configuration to JSON file"""
        try:
            config_data = {name: getattr(self, name) for name in SECTIONS}
            directory = os.path.dirname(config_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(config_file, 'w') as f:
                json.dump(config_data, f, indent=2)

        except Exception as e:
            logging.error(f"Failed to save config to {config_file}: {e}")

    def truncation_context(self, cli: bool = False) -> TruncationContext:
        if cli:
            return TruncationContext(self.truncation['cli_eps_max'], self.truncation['cli_deg_max'])
        return TruncationContext(self.truncation['eps_max'], self.truncation['deg_max'])

    def validate(self) -> bool:
        """Validate configuration settings, remembering the offending keys"""
        valid = True
        self.invalid_keys = []

        for key in ('eps_max', 'deg_max', 'd_max', 'cli_eps_max', 'cli_deg_max'):
            value = self.truncation.get(key)
            if not isinstance(value, int) or value < 0:
                logging.error(f"Invalid truncation bound {key}: {value}")
                self.invalid_keys.append(('truncation', key))
                valid = False

        for key in ('deg_max', 'cli_deg_max'):
            value = self.truncation.get(key)
            if isinstance(value, int) and value < 2:
                logging.error(f"{key} must be at least 2 to hold u u_x, got {value}")
                self.invalid_keys.append(('truncation', key))
                valid = False

        if self.verification['check_timeout'] <= 0:
            logging.error(f"Invalid check timeout: {self.verification['check_timeout']}")
            self.invalid_keys.append(('verification', 'check_timeout'))
            valid = False

        if getattr(logging, str(self.logging['level']).upper(), None) is None:
            logging.error(f"Unknown log level: {self.logging['level']}")
            self.invalid_keys.append(('logging', 'level'))
            valid = False

        if self.truncation.get('d_max', 0) > 4:
            logging.warning(f"d_max = {self.truncation['d_max']} makes verification very slow")

        return valid

    def restore_defaults(self) -> None:
        """Reset the keys the last validate() rejected to their built-in values"""
        defaults = {'truncation': TRUNCATION_CONFIG, 'verification': VERIFICATION_CONFIG,
                    'logging': LOGGING_CONFIG, 'output': OUTPUT_CONFIG}
        for section, key in self.invalid_keys:
            logging.warning(f"Using default {section}.{key} = {defaults[section][key]!r}")
            getattr(self, section)[key] = defaults[section][key]
        self.invalid_keys = []

    def setup_logging(self, level: Optional[str] = None):
        """Set up logging based on configuration"""
        if level:
            self.logging['level'] = level
        log_level = getattr(logging, str(self.logging['level']).upper(), logging.WARNING)

        handlers = []

        if self.logging['enable_console']:
            # stdout carries results, diagnostics go to stderr
            handlers.append(logging.StreamHandler(sys.stderr))

        if self.logging['enable_file']:
            from logging.handlers import RotatingFileHandler
            log_file = self.logging['file_path']
            directory = os.path.dirname(log_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            max_bytes = self.logging['max_file_size_mb'] * 1024 * 1024
            handlers.append(RotatingFileHandler(
                log_file,
                maxBytes=max_bytes,
                backupCount=self.logging['backup_count']
            ))

        logging.basicConfig(
            level=log_level,
            format=self.logging['format'],
            handlers=handlers,
            force=True
        )

    def __str__(self) -> str:
        """String representation of configuration"""
        t = self.truncation
        return f"DRKdVConfig(eps_max={t['eps_max']}, deg_max={t['deg_max']}, d_max={t['d_max']})"


_config_instance = None


def get_config(config_file: Optional[str] = None) -> DRKdVConfig:
    """Get global configuration instance"""
    global _config_instance
    if config_file is None:
        config_file = os.getenv('DRKDV_CONFIG')
    if _config_instance is None or (config_file and _config_instance.config_file != config_file):
        _config_instance = DRKdVConfig(config_file)
    return _config_instance


def reset_config() -> None:
    global _config_instance
    _config_instance = None


def load_config(config_file: Optional[str] = None, log_level: Optional[str] = None) -> DRKdVConfig:
    """Load, validate and return configuration with logging set up"""
    config = get_config(config_file)
    config.setup_logging(log_level)

    if config.validate():
        logging.info(f"Configuration loaded: {config}")
    else:
        logging.warning("Configuration validation failed - falling back to defaults for the invalid keys")
        config.restore_defaults()
        config.setup_logging(log_level)

    return config
