"""
Quick setup script to help users get started.

This script:
1. Checks if .env file exists (creates it from .env.example)
2. Checks that the required packages are importable
3. Validates the numerical configuration
4. Provides next steps
"""

import importlib.util
import shutil
from pathlib import Path


REQUIRED_PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "langgraph": "langgraph",
    "pandas": "pandas",
    "tabulate": "tabulate",
    "plotly": "plotly",
    "pydantic": "pydantic",
    "dotenv": "python-dotenv",
    "pytest": "pytest",
}


def main():
    """Run setup checks and guide user."""
    print("Harmonic Flows - Setup Check\n")

    # Check 1: .env file
    env_path = Path(".env")
    if not env_path.exists():
        example_path = Path(".env.example")
        if example_path.exists():
            shutil.copyfile(example_path, env_path)
            print("[SUCCESS] .env created from .env.example (default tolerances)\n")
        else:
            print("[WARNING] .env.example not found; built-in defaults will be used.\n")
    else:
        print("[SUCCESS] .env file exists\n")

    # Check 2: Dependencies
    missing = [dist for module, dist in REQUIRED_PACKAGES.items() if importlib.util.find_spec(module) is None]
    if missing:
        print(f"[ERROR] Missing packages: {', '.join(missing)}")
        print("   Install them with your package manager from requirements.txt, then rerun this check.\n")
        return 1
    print("[SUCCESS] All required packages found\n")

    # Check 3: Configuration
    try:
        from infrastructure.config import get_config
        config = get_config()
    except Exception as e:
        print(f"[ERROR] Configuration invalid: {e}\n")
        return 1
    print(f"[SUCCESS] Configuration valid (repair_tol = {config.repair_tol:g}, "
          f"drift_tol = {config.drift_tol:g}, output dir = {config.output_dir})\n")

    # Final instructions
    print("=" * 60)
    print("Setup Complete! Next steps:")
    print("=" * 60)
    print()
    print("1. Check the G2 conventions:")
    print("   python main.py selftest")
    print("2. Run an example flow:")
    print("   python main.py run configs/frames_noise.env")
    print("3. Check its diagnostics stream:")
    print("   python main.py check runs/frames_noise/diagnostics.jsonl --plot")
    print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
