"""Regenerate group_actions.json: optimal stage actions for each latent group.

Action for group l at stage j is +1 when bit (j - 1) of l is set, else -1.
The bit is read from Python's binary string, independently of the package.
"""
import json
from pathlib import Path

table = {}
for group in range(1, 11):
    bits = format(group, "04b")[::-1]  # least significant bit first
    table[str(group)] = [1 if bits[j] == "1" else -1 for j in range(4)]

out = Path(__file__).with_name("group_actions.json")
out.write_text(json.dumps(table, indent=1) + "\n")
print(out)
