#! /usr/bin/env python3
import os
import subprocess
import sys
from importlib.util import find_spec

# run.py: Runs the pywex command line with whatever Python environment it can find.
# Every argument is forwarded: ./run.py compare --x0 3 --t 50

# The path to the python executable running this code.
python_exe = sys.executable
# The root dir of the project
project_path = os.path.dirname(os.path.realpath(__file__))

# Path to the default venv
venv_path = os.path.join(project_path, ".venv")
# Path to the python executable of the venv
venv_python_path = os.path.join(venv_path, "Scripts", "python.exe") if os.name == "nt" \
    else os.path.join(venv_path, "bin", "python")

# Packages the numerical routes can't work without.
required = ["numpy", "scipy"]

args = sys.argv[1:]
env_vars = os.environ.copy()
env_vars["PYTHONPATH"] = project_path

# ---- FIRST STAGE: Checks ----
# Can we run with the current interpreter?

missing = [name for name in required if find_spec(name) is None]

# ---- SECOND STAGE: Run ----

if not missing:
    # Everything is here. Just go.
    sys.exit(subprocess.run([python_exe, "-m", "pywex.cli", *args], env=env_vars).returncode)
elif os.path.exists(venv_python_path):
    print("Dossier .venv trouvé, c'est parti pour pywex !", file=sys.stderr)
    sys.exit(subprocess.run([venv_python_path, "-m", "pywex.cli", *args], env=env_vars).returncode)
else:
    print("⚠️ Attention ! Certaines dépendances requises sont introuvables :", file=sys.stderr)
    for name in missing:
        print("-", name, file=sys.stderr)
    print("Voulez-vous créer un venv dans .venv et les y installer ? [o/n]", end=" ", file=sys.stderr)
    answer = input()
    if answer.lower() != "o" and answer.lower() != "y":
        print("💡 Installez-les -> pip install numpy scipy", file=sys.stderr)
        sys.exit(1)

    import venv

    print("Création du venv...", file=sys.stderr)
    venv.EnvBuilder(with_pip=True, symlinks=os.name != "nt").create(venv_path)
    print("Installation de", ", ".join(required), "...", file=sys.stderr)
    subprocess.run([venv_python_path, "-m", "pip", "install", *required]).check_returncode()
    sys.exit(subprocess.run([venv_python_path, "-m", "pywex.cli", *args], env=env_vars).returncode)
