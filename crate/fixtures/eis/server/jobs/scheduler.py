import time


def run_every(seconds, job):
    while True:
        job()
        time.sleep(seconds)
