export function sameVehicle(a, b) {
  return a.id == b.id;
}

export function isStopped(vehicle) {
  if (vehicle.speed == 0) {
    return true;
  }
  return false;
}
