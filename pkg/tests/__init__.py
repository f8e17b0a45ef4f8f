# Testes unitários para Pose Task Success
