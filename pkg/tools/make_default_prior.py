"""Regenerate the bundled synthetic pose prior (data/gmm_prior.json)."""
import json
from pathlib import Path

from contactrecon.costs import synthetic_prior

out = Path(__file__).resolve().parents[1] / "src" / "contactrecon" / "data" / "gmm_prior.json"
out.write_text(json.dumps(synthetic_prior(seed=0).to_dict()))
print(out)
