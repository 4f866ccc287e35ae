# Simulation engines: sweep, height, coupling, chains and the triple run
