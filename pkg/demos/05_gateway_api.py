"""Talk to the live HTTP gateway: status, tuning, region edits, score export.

Starts `cablewatch serve` on the S1 scenario at 8x replay speed, then drives
the same endpoints the browser console uses.
"""

import json
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

from cablewatch.synth import scenario_roi

PORT = 8753
BASE = f"http://127.0.0.1:{PORT}"

roi_path = Path(__file__).parent / "output" / "demo_roi.json"
roi_path.parent.mkdir(parents=True, exist_ok=True)
roi_path.write_text(json.dumps(scenario_roi("S1")))

server = subprocess.Popen(
    [sys.executable, "-m", "cablewatch", "serve",
     "--input", "S1", "--roi", str(roi_path),
     "--listen", f"127.0.0.1:{PORT}", "--speed", "8"],
    stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
)


def get(path):
    with urllib.request.urlopen(BASE + path, timeout=5) as response:
        body = response.read()
    return body


def put(path, payload):
    request = urllib.request.Request(
        BASE + path, data=json.dumps(payload).encode(), method="PUT",
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(request, timeout=5) as response:
        return json.loads(response.read())


try:
    for _ in range(100):
        try:
            get("/api/status")
            break
        except OSError:
            time.sleep(0.1)

    print("status:", json.loads(get("/api/status")))

    config = json.loads(get("/api/config"))
    config["tau"] = 18
    put("/api/config", config)
    print("tau after PUT:", json.loads(get("/api/config"))["tau"])

    # Watch the replay pass through the slack event.
    seen_open = False
    while True:
        status = json.loads(get("/api/status"))
        if status["events_open"]:
            seen_open = True
            print(f"event open at frame {status['frame']}, score {status['last_score']:.0f}")
        if status["frame"] >= 329:
            break
        time.sleep(0.2)

    print("events:", json.loads(get("/api/events")))
    csv_rows = get("/api/scores?from=230&to=240").decode().splitlines()
    print("score rows 230..240:")
    for row in csv_rows[:5]:
        print("   ", row)
    print("banner was shown during replay:", seen_open)
finally:
    server.terminate()
    server.wait(timeout=10)
