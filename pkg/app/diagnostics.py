"""
Diagnostics module for branchcover
Version and platform information for reports and bug reports
"""

import logging
import platform
import sys
from pathlib import Path
from typing import Dict, Any, Optional
from importlib.metadata import version, PackageNotFoundError

import yaml

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = Path(__file__).parent.parent / "config.yaml"

# Runtime dependencies whose versions go into every report
KEY_DEPENDENCIES = ["numpy", "scipy", "pyyaml", "python-dotenv", "colorlog"]


class DiagnosticsCollector:
    """Collect version information for reports"""

    def __init__(self, config_file: Optional[Path] = None):
        """
        Initialize diagnostics collector

        Args:
            config_file: config.yaml holding the application version
        """
        self.config_file = Path(config_file) if config_file else DEFAULT_CONFIG_FILE
        self.app_version = self._get_app_version()

    def collect_all(self) -> Dict[str, Any]:
        """
        Collect all diagnostic information

        Returns:
            Dictionary containing all diagnostic data
        """
        return {
            "system": self._collect_system_info(),
            "dependencies": self._collect_dependencies(),
        }

    def versions(self) -> Dict[str, Any]:
        """
        Versions record embedded in reports

        Holds only build-stable values so identical builds give identical reports.
        """
        return {
            "branchcover": self.app_version,
            "python": platform.python_version(),
            "dependencies": self._collect_dependencies(),
        }

    def _get_app_version(self) -> str:
        """Get app version from config.yaml"""
        try:
            if self.config_file.exists():
                with open(self.config_file, "r") as f:
                    config = yaml.safe_load(f) or {}
                    return str(config.get("version", "unknown"))
        except (OSError, yaml.YAMLError) as e:
            logger.debug(f"Could not read app version from {self.config_file}: {e}")
        return "unknown"

    def _collect_system_info(self) -> Dict[str, Any]:
        """Collect system information"""
        return {
            "app_version": self.app_version,
            "platform": platform.system(),
            "platform_release": platform.release(),
            "python_version": sys.version.split()[0],
            "python_executable": sys.executable,
            "architecture": platform.machine(),
        }

    def _collect_dependencies(self) -> Dict[str, str]:
        """Collect Python package versions"""
        versions = {}
        for dep in KEY_DEPENDENCIES:
            try:
                versions[dep] = version(dep)
            except PackageNotFoundError:
                versions[dep] = "not installed"
        return versions

    def generate_markdown_report(self, data: Dict[str, Any]) -> str:
        """Render collect_all() output as a short markdown report"""
        lines = ["# branchcover diagnostics", "", "## System", ""]
        for key, value in data.get("system", {}).items():
            lines.append(f"- **{key}**: {value}")
        lines += ["", "## Dependencies", ""]
        for name, ver in data.get("dependencies", {}).items():
            lines.append(f"- {name}: {ver}")
        return "\n".join(lines) + "\n"
