"""Command-line entry point: python app.py <subcommand> [options]."""

from dotenv import load_dotenv

# Load environment variables (TGPSSM_OUTPUT_ROOT, TGPSSM_DEBUG) before the logger reads them
load_dotenv()

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    main()
